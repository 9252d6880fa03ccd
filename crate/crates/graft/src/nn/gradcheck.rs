use crate::error::{Error, Result};
use crate::nn::{bind_params, BoundParams, ParamTree};
use crate::tape::{Tape, Var};

/// Compares the analytic gradient of a scalar function against central
/// finite differences over every parameter entry, returning the maximum
/// relative error `|analytic - cd| / max(|analytic|, |cd|, 1e-8)`.
///
/// `build` must deterministically construct the scalar loss from the bound
/// parameters; it is re-invoked for each perturbed evaluation.
pub fn grad_check<F>(build: F, params: &ParamTree, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &BoundParams) -> Var,
{
    if eps <= 0.0 {
        return Err(Error::Param("grad_check eps must be positive".into()));
    }
    let eval = |p: &ParamTree| -> Result<f64> {
        let mut t = Tape::new();
        let bound = bind_params(&mut t, p);
        let loss = build(&mut t, &bound);
        let v = t.scalar(loss);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("grad_check: non-finite loss {v}")));
        }
        Ok(v)
    };

    // Analytic pass.
    let mut t = Tape::new();
    let bound = bind_params(&mut t, params);
    let loss = build(&mut t, &bound);
    if !t.scalar(loss).is_finite() {
        return Err(Error::Numerical("grad_check: non-finite loss".into()));
    }
    let grads = t.backward(loss);

    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    for name in params.names() {
        let var = bound.var(&name)?;
        let shape = params.get(&name)?.dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let orig = params.get(&name)?[[i, j]];
                work.get_mut(&name)?[[i, j]] = orig + eps;
                let plus = eval(&work)?;
                work.get_mut(&name)?[[i, j]] = orig - eps;
                let minus = eval(&work)?;
                work.get_mut(&name)?[[i, j]] = orig;
                let cd = (plus - minus) / (2.0 * eps);
                let analytic = grads.get(var).map(|g| g[[i, j]]).unwrap_or(0.0);
                let rel = (analytic - cd).abs() / analytic.abs().max(cd.abs()).max(1e-8);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_linear;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn linear_function_has_exact_gradient() {
        let mut p = ParamTree::new();
        p.insert("x", Array2::from_elem((3, 2), 0.4));
        let err = grad_check(
            |t, b| {
                let x = b.var("x").unwrap();
                t.sum_all(x)
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn quadratic_gradient_error_is_tiny() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut p = ParamTree::new();
        p.insert("x", init_linear(4, 4, &mut rng));
        let err = grad_check(
            |t, b| {
                let x = b.var("x").unwrap();
                let sq = t.mul(x, x);
                let s = t.sum_all(sq);
                t.scale(s, 0.5)
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut p = ParamTree::new();
        p.insert("x", Array2::from_elem((1, 1), -1.0));
        let err = grad_check(
            |t, b| {
                let x = b.var("x").unwrap();
                let l = t.ln(x); // ln of a negative number
                t.sum_all(l)
            },
            &p,
            1e-5,
        );
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
