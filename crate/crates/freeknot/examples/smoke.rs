//! Quick end-to-end run of the five benchmarks; prints one line each.

use freeknot::bnb::{solve_one_knot, BnbOptions};
use freeknot::funcs::{make_grid, sample, BenchmarkId};

fn main() {
    let g = make_grid(-1.0, 1.0, 1e-3).unwrap();
    for fid in BenchmarkId::ALL {
        let data = sample(fid, &g);
        let opts = BnbOptions {
            m_override: Some(fid.benchmark_big_m()),
            ..BnbOptions::default()
        };
        let t0 = std::time::Instant::now();
        let rep = solve_one_knot(&data, &opts).unwrap();
        println!(
            "{}: dev={:.12} winner={} knot={:?} branch={:?} per_sub={:?} nodes={} pivots={} time={:.2}s warn={}",
            fid.label(),
            rep.objective,
            rep.winner,
            rep.best_spline.knot,
            rep.certificate.branch,
            rep.certificate.details.per_subinterval,
            rep.nodes,
            rep.lp_pivots,
            t0.elapsed().as_secs_f64(),
            rep.warnings.len(),
        );
        println!(
            "    pieces: ({:.9}, {:.9}) ({:.9}, {:.9}) kind={:?}",
            rep.best_spline.piece1.slope,
            rep.best_spline.piece1.intercept,
            rep.best_spline.piece2.slope,
            rep.best_spline.piece2.intercept,
            rep.best_spline.kind,
        );
    }
}
