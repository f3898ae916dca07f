fn main() {
    std::process::exit(qagcl::cli::run());
}
