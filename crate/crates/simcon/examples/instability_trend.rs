//! The curse of dimensionality as query instability: with the dataset
//! size held fixed, the fraction of queries whose (1+eps)d_X-ball
//! swallows more than half the dataset climbs from zero to one as the
//! dimension grows.
//!
//! Run: cargo run --release --example instability_trend

use simcon::analysis::instability_fraction;
use simcon::space::{Space, SpaceKind};
use simcon::workload::Workload;

fn main() {
    let eps = 0.5;
    let n_points = 1000;
    let queries = 1000;
    println!("sphere, |X| = {n_points} i.i.d., eps = {eps}, {queries} queries\n");
    println!("{:>6} {:>12} {:>12}", "dim", "unstable", "stderr");
    for dim in [4u32, 8, 16, 32, 48, 64, 96, 128] {
        let space = Space::new(SpaceKind::SphereGeodesic, dim).unwrap();
        let workload = Workload::build_iid(space, n_points, 1000 + dim as u64).unwrap();
        let est = instability_fraction(&workload, eps, queries, 17).unwrap();
        println!("{:>6} {:>12.4} {:>12.4}", dim, est.fraction, est.stderr);
    }
    println!("\nPast n ~ 64 almost every query is unstable: a range query of");
    println!("radius (1+eps)d_X returns most of the dataset, so answering it");
    println!("costs about as much as a full scan.");
}
