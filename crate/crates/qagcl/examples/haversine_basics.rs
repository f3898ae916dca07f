//! Great-circle distances as the augmentation sees them.
//!
//! Run with: `cargo run --example haversine_basics`

use qagcl::augment::{haversine_km, EARTH_RADIUS_KM};

fn main() {
    let pairs = [
        ("Paris -> London", (48.8566, 2.3522), (51.5074, -0.1278)),
        ("San Francisco -> Tokyo", (37.7749, -122.4194), (35.6762, 139.6503)),
        ("Sydney -> Sao Paulo", (-33.8688, 151.2093), (-23.5505, -46.6333)),
        ("Equator quarter turn", (0.0, 0.0), (0.0, 90.0)),
        ("Pole to pole", (90.0, 0.0), (-90.0, 0.0)),
    ];
    for (label, a, b) in pairs {
        let d = haversine_km(a.0, a.1, b.0, b.1);
        println!("{label:<24} {d:>10.1} km");
    }

    // Antipodal points realize the half circumference exactly.
    let antipodal = haversine_km(0.0, 0.0, 0.0, 180.0);
    println!(
        "\nantipodal distance {antipodal:.3} km = pi * r = {:.3} km",
        std::f64::consts::PI * EARTH_RADIUS_KM
    );

    // Symmetry and the triangle inequality hold for arbitrary triples,
    // which is what makes the distance a sound edge-filtering criterion.
    let (p, q, r) = ((12.3, 45.6), (-7.8, 133.2), (55.0, -21.0));
    let pq = haversine_km(p.0, p.1, q.0, q.1);
    let qp = haversine_km(q.0, q.1, p.0, p.1);
    let qr = haversine_km(q.0, q.1, r.0, r.1);
    let pr = haversine_km(p.0, p.1, r.0, r.1);
    println!("\nsymmetry: |pq - qp| = {:.1e}", (pq - qp).abs());
    println!("triangle: pr = {pr:.1} <= pq + qr = {:.1}", pq + qr);
}
