//! Nelder-Mead simplex minimization on an unconstrained space.

/// Outcome of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Largest distance from the best vertex at exit.
    pub diameter: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    /// Initial edge length along each coordinate.
    pub step: f64,
    pub diameter_tol: f64,
    pub max_iter: usize,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { step: 0.5, diameter_tol: 1e-8, max_iter: 500, restarts: 2 }
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn run<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> Minimum {
    let n = x0.len();
    // Non-finite objective values rank last.
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..n {
        let mut v = x0.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let diam = diameter(&simplex);
        if diam < tol || iterations >= max_iter {
            return Minimum { x: simplex[0].clone(), value: values[0], iterations, diameter: diam, converged: diam < tol };
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let xr = toward(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = toward(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = toward(-0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = toward(0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = (0..n).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
            values[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
}

/// Minimizes `f` from `x0`, restarting from the best point after each
/// converged run so that a collapsed simplex cannot stall the search.
///
/// Convergence means the simplex diameter fell below `diameter_tol`
/// within `max_iter` iterations of the final run.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: NmOptions) -> Minimum {
    let mut best = run(&f, x0, opts.step, opts.diameter_tol, opts.max_iter);
    let mut total = best.iterations;
    let mut step = opts.step * 0.1;
    for _ in 0..opts.restarts {
        if !best.converged {
            break;
        }
        let again = run(&f, &best.x, step, opts.diameter_tol, opts.max_iter);
        total += again.iterations;
        let improved = again.value < best.value;
        let converged = again.converged;
        if improved {
            best = again;
        }
        best.converged = converged;
        if !improved {
            break;
        }
        step *= 0.1;
    }
    best.iterations = total;
    best
}
