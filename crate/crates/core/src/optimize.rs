//! Nelder–Mead simplex search.

/// Outcome of one simplex run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// Best objective after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Initial edge length along each coordinate.
    pub step: f64,
    /// Stop when every vertex lies within this distance of the best one.
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            step: 0.1,
            tol: 1e-6,
            max_evals: 5000,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn affine(c: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    // c + t (d - c)
    c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as
/// `+inf`, so the search moves away from them. The returned point is never
/// worse than `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut n_evals = 0;
    let mut eval = |x: &[f64], n_evals: &mut usize| {
        *n_evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex = vec![x0.to_vec()];
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut n_evals)).collect();
    let mut trace = Vec::new();

    let sort = |simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>| {
        // Stable, so the earliest vertex wins ties and x0 stays best until
        // something strictly better is found.
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        *values = idx.iter().map(|&i| values[i]).collect();
    };
    sort(&mut simplex, &mut values);

    let mut converged = false;
    loop {
        trace.push(values[0]);
        if dim == 0 || diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        if n_evals >= opts.max_evals {
            break;
        }
        let worst = dim;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..worst].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();

        let xr = affine(&centroid, &simplex[worst], -REFLECT);
        let fr = eval(&xr, &mut n_evals);
        if fr < values[0] {
            let xe = affine(&centroid, &simplex[worst], -EXPAND);
            let fe = eval(&xe, &mut n_evals);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr < values[worst - 1] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let (xc, fc) = if fr < values[worst] {
                let xc = affine(&centroid, &xr, CONTRACT);
                let fc = eval(&xc, &mut n_evals);
                (xc, fc)
            } else {
                let xc = affine(&centroid, &simplex[worst], CONTRACT);
                let fc = eval(&xc, &mut n_evals);
                (xc, fc)
            };
            if fc < values[worst].min(fr) {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=dim {
                    simplex[i] = affine(&best, &simplex[i], SHRINK);
                    values[i] = eval(&simplex[i], &mut n_evals);
                }
            }
        }
        sort(&mut simplex, &mut values);
    }
    SimplexResult {
        x: simplex[0].clone(),
        fx: values[0],
        n_evals,
        converged,
        trace,
    }
}
