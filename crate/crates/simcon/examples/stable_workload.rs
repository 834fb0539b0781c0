//! A workload built for stability: pack a torus with a delta-separated
//! point set, then look for 1-unstable queries. The construction
//! predicts any such query centres cluster inside a ball of radius
//! 4 delta (so pairwise within 8 delta) and the median NN distance stays
//! above delta / 2.
//!
//! Run: cargo run --release --example stable_workload

use simcon::analysis::stable_workload_check;
use simcon::space::{Space, SpaceKind};

fn main() {
    let space = Space::new(SpaceKind::Torus, 8).unwrap();
    let delta = 0.08;
    let report = stable_workload_check(space, delta, 1.0, 2000, 3, 10_000, 30_000).unwrap();

    println!("torus n=8, delta = {delta}");
    println!(
        "packing kept {} points ({} candidates, {} rejections, stop: {:?})",
        report.n_points,
        report.build_stats.candidates_drawn,
        report.build_stats.rejections,
        report.build_stats.stopped_by
    );
    println!(
        "median NN distance {:.4} (se {:.4}) vs delta/2 = {:.4}",
        report.m_hat,
        report.m_hat_stderr,
        delta / 2.0
    );
    match report.unstable_query_indices.len() {
        0 => println!("no 1-unstable queries among {}", report.num_queries),
        k => println!(
            "{k} 1-unstable queries; max pairwise centre distance {:.4} (allowed {:.4})",
            report.max_pairwise_distance.unwrap_or(0.0),
            8.0 * delta
        ),
    }
    println!("stability prediction holds: {}", report.within_eight_delta);
}
