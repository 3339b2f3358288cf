use crate::error::{Error, Result};

use super::{Matrix, ParamStore, Tape, Var};

/// Compares the reverse-mode gradient of a scalar function against central
/// finite differences and returns the largest elementwise relative error
/// `|g_ad − g_fd| / max(1, |g_ad|, |g_fd|)`.
///
/// `f` receives a fresh tape and the tracked input each time it is called.
pub fn grad_check<F>(f: F, x: &Matrix, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::Config(format!(
            "finite-difference step {h} outside [1e-6, 1e-3]"
        )));
    }
    let eval = |input: &Matrix| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(input.clone());
        let out = f(&mut tape, v)?;
        Ok(tape.scalar(out))
    };

    let mut tape = Tape::new();
    let v = tape.leaf(x.clone());
    let out = f(&mut tape, v)?;
    let analytic = tape.backward(out)?.get_or_zeros(&tape, v);

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + h;
        let up = eval(&probe)?;
        probe[[r, c]] = orig - h;
        let down = eval(&probe)?;
        probe[[r, c]] = orig;
        let fd = (up - down) / (2.0 * h);
        let ad = analytic[[r, c]];
        let err = (ad - fd).abs() / 1f64.max(ad.abs()).max(fd.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Runs [`grad_check`] once per parameter in `store`, holding the others
/// fixed. Returns the worst error and the parameter that produced it.
pub fn grad_check_params<F>(store: &ParamStore, f: F, h: f64) -> Result<(f64, String)>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut worst = (0.0, String::new());
    for (name, value) in store.iter() {
        let err = grad_check(
            |tape, v| {
                // bind the probed tensor under its own name so `tape.param` returns it
                tape.params.insert(name.clone(), v);
                f(tape, store)
            },
            value,
            h,
        )?;
        if err >= worst.0 {
            worst = (err, name.clone());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_of_squares_matches_analytic() {
        let x = array![[0.3, -1.2, 2.5, 0.7]];
        let err = grad_check(
            |t, v| {
                let sq = t.mul(v, v)?;
                Ok(t.sum(sq))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn rejects_step_out_of_range() {
        let x = array![[1.0]];
        assert!(grad_check(|t, v| Ok(t.sum(v)), &x, 1e-1).is_err());
    }
}
