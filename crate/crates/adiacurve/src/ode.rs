//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! Fifth-order steps with the embedded fourth-order error estimate drive
//! the step controller. Output is collected either on a caller-supplied
//! grid (steps are clipped so grid points are exact step endpoints) or as
//! a dense solution with the standard fourth-order interpolant.

use crate::error::{Error, Result};

// Butcher tableau, Dormand-Prince 5(4), FSAL.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b5 - b4: drives the error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights (Hairer's contd5).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_steps: 500_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

/// States at the requested grid points plus controller statistics.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: OdeStats,
}

struct Stepper<'a, F> {
    rhs: &'a mut F,
    dim: usize,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    opts: OdeOptions,
    stats: OdeStats,
}

impl<'a, F> Stepper<'a, F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn new(rhs: &'a mut F, dim: usize, opts: OdeOptions) -> Self {
        Stepper {
            rhs,
            dim,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            opts,
            stats: OdeStats::default(),
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], slot: usize) -> Result<()> {
        self.stats.rhs_evals += 1;
        let mut out = std::mem::take(&mut self.k[slot]);
        let r = (self.rhs)(t, y, &mut out);
        self.k[slot] = out;
        r
    }

    /// One attempted step from `(t, y)` with size `h`; `k[0]` must hold
    /// f(t, y). On success writes `y1` and returns the error norm.
    fn try_step(&mut self, t: f64, y: &[f64], h: f64, y1: &mut [f64]) -> Result<f64> {
        for stage in 1..7 {
            for i in 0..self.dim {
                let mut acc = 0.0;
                for (j, kj) in self.k.iter().enumerate().take(stage) {
                    let a = A[stage][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            let y_stage = std::mem::take(&mut self.y_stage);
            let t_stage = t + C[stage] * h;
            // stage 6 lands on y1 (FSAL): stages 0..6 with A[6] = b
            let r = self.eval(t_stage, &y_stage, stage);
            self.y_stage = y_stage;
            r?;
        }
        y1.copy_from_slice(&self.y_stage); // stage 7 input == 5th order result
        let mut err_sq = 0.0;
        for i in 0..self.dim {
            let mut e = 0.0;
            for (j, kj) in self.k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y1[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        Ok((err_sq / self.dim as f64).sqrt())
    }
}

fn initial_step(dim: usize, t0: f64, y0: &[f64], f0: &[f64], span: f64, opts: &OdeOptions) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..dim {
        let sc = opts.atol + opts.rtol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = (d0.sqrt(), d1.sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h.min(span).max(16.0 * f64::EPSILON * t0.abs().max(1.0))
}

/// Integrate `rhs` from `grid[0]` to `grid.last()`, reporting the state at
/// every grid point. `observer` sees every accepted step endpoint
/// (including clipped ones), which is where trajectory diagnostics such
/// as norm drift are measured.
pub fn solve_to_grid<F, O>(
    mut rhs: F,
    y0: &[f64],
    grid: &[f64],
    opts: OdeOptions,
    mut observer: O,
) -> Result<GridSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]),
{
    if grid.len() < 2 {
        return Err(Error::config("output grid needs at least two points"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::config("output grid must strictly increase"));
        }
    }
    let dim = y0.len();
    let t0 = grid[0];
    let tf = *grid.last().unwrap();
    let span = tf - t0;

    let mut st = Stepper::new(&mut rhs, dim, opts);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; dim];
    st.eval(t, &y, 0)?;

    let mut h = initial_step(dim, t0, &y, &st.k[0], span, &opts);
    let mut states = Vec::with_capacity(grid.len());
    states.push(y.clone());
    let mut next_out = 1;

    while next_out < grid.len() {
        if st.stats.accepted + st.stats.rejected >= opts.max_steps {
            return Err(Error::ToleranceNotMet { t });
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::ToleranceNotMet { t });
        }
        // clip to the next output point; a tiny remainder collapses onto it
        let t_target = grid[next_out];
        let mut h_try = h.min(t_target - t);
        if t + h_try >= t_target - h_floor {
            h_try = t_target - t;
        }
        let err = st.try_step(t, &y, h_try, &mut y1)?;
        if err <= 1.0 {
            t += h_try;
            std::mem::swap(&mut y, &mut y1);
            st.k.swap(0, 6); // FSAL: last stage derivative becomes f(t, y)
            st.stats.accepted += 1;
            observer(t, &y);
            if t >= t_target - h_floor {
                t = t_target;
                states.push(y.clone());
                next_out += 1;
            }
            let grow = (0.9 * err.powf(-0.2)).min(5.0);
            h = (h_try * grow).min(span);
        } else {
            st.stats.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(GridSolution {
        grid: grid.to_vec(),
        states,
        stats: st.stats,
    })
}

/// Dense solution: every accepted step stores the quartic interpolant.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    t_ends: Vec<f64>,
    t0: f64,
    cont: Vec<[Vec<f64>; 5]>,
    pub final_state: Vec<f64>,
    pub stats: OdeStats,
}

impl DenseSolution {
    pub fn range(&self) -> (f64, f64) {
        (self.t0, *self.t_ends.last().unwrap())
    }

    /// Interpolated state at `t` (clamped to the integration range).
    pub fn sample(&self, t: f64, out: &mut [f64]) {
        let idx = match self
            .t_ends
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.min(self.t_ends.len() - 1),
        };
        let t_start = if idx == 0 { self.t0 } else { self.t_ends[idx - 1] };
        let h = self.t_ends[idx] - t_start;
        let s = ((t - t_start) / h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let c = &self.cont[idx];
        for i in 0..out.len() {
            out[i] = c[0][i]
                + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
    }
}

/// Integrate over `[t0, tf]` keeping the dense interpolant of every step.
/// Meant for bounded windows; memory grows with the step count.
pub fn solve_dense<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    tf: f64,
    opts: OdeOptions,
) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(tf > t0) {
        return Err(Error::config("integration window must increase"));
    }
    let dim = y0.len();
    let span = tf - t0;
    let mut st = Stepper::new(&mut rhs, dim, opts);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; dim];
    st.eval(t, &y, 0)?;
    let mut h = initial_step(dim, t0, &y, &st.k[0], span, &opts);

    let mut t_ends = Vec::new();
    let mut cont = Vec::new();

    while t < tf {
        if st.stats.accepted + st.stats.rejected >= opts.max_steps {
            return Err(Error::ToleranceNotMet { t });
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::ToleranceNotMet { t });
        }
        let mut h_try = h.min(tf - t);
        if t + h_try >= tf - h_floor {
            h_try = tf - t;
        }
        let err = st.try_step(t, &y, h_try, &mut y1)?;
        if err <= 1.0 {
            // contd5 coefficients for this step
            let mut c: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
            for i in 0..dim {
                let dy = y1[i] - y[i];
                let bspl = h_try * st.k[0][i] - dy;
                c[0][i] = y[i];
                c[1][i] = dy;
                c[2][i] = bspl;
                c[3][i] = dy - h_try * st.k[6][i] - bspl;
                let mut d_acc = 0.0;
                for (j, kj) in st.k.iter().enumerate() {
                    if D[j] != 0.0 {
                        d_acc += D[j] * kj[i];
                    }
                }
                c[4][i] = h_try * d_acc;
            }
            t += h_try;
            t_ends.push(t);
            cont.push(c);
            std::mem::swap(&mut y, &mut y1);
            st.k.swap(0, 6);
            st.stats.accepted += 1;
            let grow = (0.9 * err.powf(-0.2)).min(5.0);
            h = (h_try * grow).min(span);
        } else {
            st.stats.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(DenseSolution {
        t_ends,
        t0,
        cont,
        final_state: y,
        stats: st.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_rhs(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let sol = solve_to_grid(exp_rhs, &[1.0], &grid, OdeOptions::default(), |_, _| {})
            .unwrap();
        for (t, s) in grid.iter().zip(&sol.states) {
            assert!((s[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_phase_accuracy() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let grid = vec![0.0, 10.0 * std::f64::consts::TAU];
        let sol = solve_to_grid(
            rhs,
            &[1.0, 0.0],
            &grid,
            OdeOptions::with_tol(1e-10, 1e-12),
            |_, _| {},
        )
        .unwrap();
        let yf = &sol.states[1];
        assert!((yf[0] - 1.0).abs() < 1e-7);
        assert!(yf[1].abs() < 1e-7);
    }

    #[test]
    fn tolerance_scaling() {
        // error must shrink roughly in proportion to the tolerance
        let run = |rtol: f64| {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                dy[0] = t.cos() * y[0];
                Ok(())
            };
            let grid = vec![0.0, 5.0];
            let sol = solve_to_grid(
                rhs,
                &[1.0],
                &grid,
                OdeOptions::with_tol(rtol, 1e-14),
                |_, _| {},
            )
            .unwrap();
            (sol.states[1][0] - 5.0f64.sin().exp()).abs()
        };
        let coarse = run(1e-6);
        let fine = run(1e-10);
        assert!(fine < coarse / 100.0, "coarse {coarse}, fine {fine}");
        assert!(fine < 1e-9);
    }

    #[test]
    fn step_underflow_reports_tolerance_failure() {
        let sol = solve_to_grid(
            exp_rhs,
            &[1.0],
            &[0.0, 1.0],
            OdeOptions {
                rtol: 1e-300,
                atol: 1e-300,
                max_steps: 10_000,
            },
            |_, _| {},
        );
        assert!(matches!(sol, Err(Error::ToleranceNotMet { .. })));
    }

    #[test]
    fn dense_output_matches_grid_solve() {
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[1];
            dy[1] = -t.sin() - 0.3 * y[0];
            Ok(())
        };
        let dense =
            solve_dense(rhs, &[0.2, -0.1], 0.0, 8.0, OdeOptions::with_tol(1e-10, 1e-12))
                .unwrap();
        // reference: land exactly on many interior points
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.02).collect();
        let sol = solve_to_grid(
            rhs,
            &[0.2, -0.1],
            &grid,
            OdeOptions::with_tol(1e-12, 1e-14),
            |_, _| {},
        )
        .unwrap();
        let mut buf = [0.0; 2];
        let mut worst = 0.0f64;
        for (t, s) in grid.iter().zip(&sol.states) {
            dense.sample(*t, &mut buf);
            worst = worst.max((buf[0] - s[0]).abs().max((buf[1] - s[1]).abs()));
        }
        assert!(worst < 1e-9, "dense interpolation error {worst}");
    }

    #[test]
    fn rhs_error_propagates() {
        let rhs = |t: f64, _y: &[f64], dy: &mut [f64]| -> Result<()> {
            if t > 0.5 {
                return Err(Error::domain("rhs", "boom"));
            }
            dy[0] = 1.0;
            Ok(())
        };
        let r = solve_to_grid(rhs, &[0.0], &[0.0, 1.0], OdeOptions::default(), |_, _| {});
        assert!(matches!(r, Err(Error::Domain { .. })));
    }
}
