//! Derivative-free minimization: Powell's direction-set method with a
//! bracketing Brent line search, plus golden-section helpers for 1-D
//! refinement. Maximization is done by negating the objective at call sites.

const GOLD: f64 = 1.618_034;
const GLIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const CGOLD: f64 = 0.381_966_0;
const ZEPS: f64 = 1e-14;
const BRENT_ITMAX: usize = 100;
const POWELL_ITMAX: usize = 200;

/// Outcome of a Powell search. `converged` is false when the iteration cap
/// was reached; `x`/`value` then hold the best point found so far.
#[derive(Debug, Clone)]
pub struct MinResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Re-runs of Powell from the incumbent minimum with a fresh direction set;
/// narrow curved valleys often yield further progress after the original
/// direction set has degenerated.
const POWELL_CYCLES: usize = 4;

/// Sweeps granted before a restart trailing the incumbent is abandoned.
const BAIL_SWEEPS: usize = 4;

/// Powell direction-set minimization started from `start` and every vector
/// in `restarts`; the best run wins and is then polished by restarted
/// cycles until they stop improving. Later restarts are abandoned early
/// once they trail the incumbent by a clear margin.
pub fn minimize_powell<F>(mut f: F, start: &[f64], tol: f64, restarts: &[Vec<f64>]) -> MinResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = powell_single(&mut f, start, tol, None);
    for s in restarts {
        let r = powell_single(&mut f, s, tol, Some(best.value));
        if r.value < best.value {
            best = r;
        }
    }
    for _ in 1..POWELL_CYCLES {
        let r = powell_single(&mut f, &best.x, tol, None);
        if r.value >= best.value - tol * (best.value.abs() + 1e-25) {
            if r.value < best.value {
                best = r;
            }
            break;
        }
        best = r;
    }
    best
}

fn powell_single<F>(f: &mut F, start: &[f64], tol: f64, ceiling: Option<f64>) -> MinResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let line_tol = tol.sqrt().clamp(1e-8, 1e-3);
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut p = start.to_vec();
    let mut fret = f(&p);
    let mut pt = p.clone();
    let mut ptt = vec![0.0; n];
    let mut xit = vec![0.0; n];

    for iter in 0..POWELL_ITMAX {
        if let Some(cap) = ceiling {
            if iter >= BAIL_SWEEPS && fret > cap + 1e-3 * (1.0 + cap.abs()) {
                return MinResult {
                    x: p,
                    value: fret,
                    converged: false,
                };
            }
        }
        let fp = fret;
        let mut ibig = 0;
        let mut del = 0.0;
        for (i, dir) in dirs.iter_mut().enumerate() {
            let fptt = fret;
            fret = line_minimize(f, &mut p, dir, line_tol);
            if fptt - fret > del {
                del = fptt - fret;
                ibig = i;
            }
        }
        if 2.0 * (fp - fret) <= tol * (fp.abs() + fret.abs()) + 1e-25 {
            return MinResult {
                x: p,
                value: fret,
                converged: true,
            };
        }
        for j in 0..n {
            ptt[j] = 2.0 * p[j] - pt[j];
            xit[j] = p[j] - pt[j];
        }
        pt.copy_from_slice(&p);
        let fptt = f(&ptt);
        if fptt < fp {
            let t = 2.0 * (fp - 2.0 * fret + fptt) * (fp - fret - del).powi(2)
                - del * (fp - fptt).powi(2);
            if t < 0.0 {
                fret = line_minimize(f, &mut p, &mut xit, line_tol);
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = xit.clone();
            }
        }
    }
    MinResult {
        x: p,
        value: fret,
        converged: false,
    }
}

/// Minimizes `f` along `point + lambda * dir`, moving `point` to the line
/// minimum and rescaling `dir` by the step taken. Returns the new value.
fn line_minimize<F>(f: &mut F, point: &mut [f64], dir: &mut [f64], tol: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let n = point.len();
    let mut probe = vec![0.0; n];
    let mut g = |lambda: f64| {
        for j in 0..n {
            probe[j] = point[j] + lambda * dir[j];
        }
        f(&probe)
    };
    let (ax, bx, cx) = bracket_minimum(&mut g, 0.0, 1.0);
    let (lmin, fmin) = brent_min(&mut g, ax, bx, cx, tol, BRENT_ITMAX);
    for j in 0..n {
        point[j] += lmin * dir[j];
        dir[j] *= lmin;
    }
    fmin
}

/// Expands from two initial abscissae until three points bracket a minimum.
fn bracket_minimum<G>(g: &mut G, mut ax: f64, mut bx: f64) -> (f64, f64, f64)
where
    G: FnMut(f64) -> f64,
{
    let mut fa = g(ax);
    let mut fb = g(bx);
    if fb > fa {
        std::mem::swap(&mut ax, &mut bx);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut cx = bx + GOLD * (bx - ax);
    let mut fc = g(cx);
    while fb > fc {
        let r = (bx - ax) * (fb - fc);
        let q = (bx - cx) * (fb - fa);
        let denom = 2.0 * (q - r).abs().max(TINY) * (q - r).signum();
        let mut u = bx - ((bx - cx) * q - (bx - ax) * r) / denom;
        let ulim = bx + GLIMIT * (cx - bx);
        let mut fu;
        if (bx - u) * (u - cx) > 0.0 {
            fu = g(u);
            if fu < fc {
                return (bx, u, cx);
            } else if fu > fb {
                return (ax, bx, u);
            }
            u = cx + GOLD * (cx - bx);
            fu = g(u);
        } else if (cx - u) * (u - ulim) > 0.0 {
            fu = g(u);
            if fu < fc {
                bx = cx;
                cx = u;
                u = cx + GOLD * (cx - bx);
                fb = fc;
                fc = fu;
                fu = g(u);
            }
        } else if (u - ulim) * (ulim - cx) >= 0.0 {
            u = ulim;
            fu = g(u);
        } else {
            u = cx + GOLD * (cx - bx);
            fu = g(u);
        }
        ax = bx;
        bx = cx;
        cx = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    (ax, bx, cx)
}

/// Brent's parabolic-interpolation line minimum on a bracketed interval.
fn brent_min<G>(g: &mut G, ax: f64, bx: f64, cx: f64, tol: f64, itmax: usize) -> (f64, f64)
where
    G: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (ax.min(cx), ax.max(cx));
    let mut x = bx;
    let mut w = bx;
    let mut v = bx;
    let mut fx = g(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..itmax {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return (x, fx);
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Golden-section minimum of `g` on `[a, b]` (unimodal assumption).
pub fn golden_min<G>(mut g: G, a: f64, b: f64, tol: f64, itmax: usize) -> (f64, f64)
where
    G: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - (hi - lo) * (1.0 - CGOLD);
    let mut x2 = lo + (hi - lo) * (1.0 - CGOLD);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..itmax {
        if hi - lo <= tol {
            break;
        }
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * (1.0 - CGOLD);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * (1.0 - CGOLD);
            f1 = g(x1);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section maximum of `g` on `[a, b]`.
pub fn golden_max<G>(mut g: G, a: f64, b: f64, tol: f64, itmax: usize) -> (f64, f64)
where
    G: FnMut(f64) -> f64,
{
    let (x, neg) = golden_min(|t| -g(t), a, b, tol, itmax);
    (x, -neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize_powell(
            |x| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            1e-10,
            &[],
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!((r.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_valley() {
        let r = minimize_powell(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            1e-10,
            &[],
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4, "x = {:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn periodic_objective_interior_minimum() {
        let r = minimize_powell(|x| -x[0].cos(), &[0.3], 1e-12, &[]);
        assert!(r.x[0].abs() < 1e-6, "theta = {}", r.x[0]);
        assert!((r.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn restarts_never_worse_than_any_start() {
        let f = |x: &[f64]| (x[0].sin() * 3.0) + 0.1 * x[0] * x[0];
        let starts = vec![vec![2.0], vec![-5.0], vec![9.0]];
        let r = minimize_powell(f, &[0.0], 1e-9, &starts);
        assert!(r.value <= f(&[0.0]) + 1e-12);
        for s in &starts {
            assert!(r.value <= f(s) + 1e-12);
        }
    }

    #[test]
    fn golden_section_refines_maximum() {
        let (x, v) = golden_max(|t| t * (1.0 - t), 0.0, 1.0, 1e-10, 200);
        assert!((x - 0.5).abs() < 1e-8);
        assert!((v - 0.25).abs() < 1e-12);
    }
}
