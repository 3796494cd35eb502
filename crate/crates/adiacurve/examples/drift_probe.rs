// Scratch experiment: norm drift of the DOPRI5 propagation vs window size
// and tolerance, for the linear-sweep model. Used to pick the default
// truncation window; not part of the test suite.

use adiacurve::ode::{solve_to_grid, OdeOptions};

fn main() {
    for rtol in [1e-9, 1e-10, 1e-11] {
        for tmax in [5.0, 10.0, 20.0, 50.0, 100.0, 200.0] {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> adiacurve::Result<()> {
                let (d, o) = (t, 1.0);
                dy[0] = d * y[1] + o * y[3];
                dy[1] = -d * y[0] - o * y[2];
                dy[2] = o * y[1] - d * y[3];
                dy[3] = -o * y[0] + d * y[2];
                Ok(())
            };
            let th = 1.0f64.atan2(-tmax);
            let y0 = [-(th / 2.0).sin(), 0.0, (th / 2.0).cos(), 0.0];
            let grid = vec![-tmax, 0.0, tmax];
            let mut drift = 0.0f64;
            let t0 = std::time::Instant::now();
            let sol = solve_to_grid(
                rhs,
                &y0,
                &grid,
                OdeOptions::with_tol(rtol, rtol * 1e-3),
                |_, y| {
                    let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]).sqrt();
                    drift = drift.max((n - 1.0).abs());
                },
            )
            .unwrap();
            println!(
                "rtol {rtol:.0e}  T {tmax:>5}  steps {:>8}  drift {drift:.3e}  ({:?})",
                sol.stats.accepted,
                t0.elapsed()
            );
        }
    }
}
