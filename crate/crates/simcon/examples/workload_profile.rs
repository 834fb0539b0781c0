//! Builds an i.i.d. workload on a sphere, profiles it (median NN
//! distance, half-measure radii, weak homogeneity), and round-trips the
//! dataset through its serialized form.
//!
//! Run: cargo run --release --example workload_profile

use simcon::workload::Workload;
use simcon::space::{Space, SpaceKind};

fn main() {
    let space = Space::new(SpaceKind::SphereGeodesic, 30).unwrap();
    let workload = Workload::build_iid(space, 500, 7).unwrap();
    println!(
        "dataset: {} points on {} (n={})",
        workload.len(),
        space.kind.name(),
        space.dim
    );

    let tol = space.diameter() / 1000.0;
    let profile = workload.profile(0.3, 2000, tol, 0, 99).unwrap();
    println!("median NN distance  : {:.4} (se {:.4})", profile.median_nn, profile.median_nn_stderr);
    println!(
        "half-measure radii  : [{:.4}, {:.4}] (width {:.2e})",
        profile.r_x.iter().cloned().fold(f64::INFINITY, f64::min),
        profile.r_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        profile.r_interval_width
    );
    println!(
        "weakly 0.3-homogeneous: {} (transitive space: radii are all pi/2)",
        profile.is_weakly_homogeneous
    );

    // Serialize, reload, verify the bytes and points survive.
    let text = workload.to_json();
    let reloaded = Workload::from_json(&text).unwrap();
    assert_eq!(reloaded.to_json(), text);
    assert_eq!(reloaded.points(), workload.points());
    println!(
        "\nserialized dataset: {} bytes of JSON (+ base64 f64 body), reload byte-identical",
        text.len()
    );

    // A query landing on a data point is its own nearest neighbour.
    let member = workload.points()[3].clone();
    let (d, idx) = workload.nn_distance(&member).unwrap();
    println!("query at data point 3 -> nn index {idx}, distance {d}");
}
