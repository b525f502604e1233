use ndarray::Array1;

use crate::scalar::Scalar;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn numeric_gradient<T, F>(mut f: F, x: &Array1<T>, h: T) -> Array1<T>
where
    T: Scalar,
    F: FnMut(&Array1<T>) -> T,
{
    let mut out = Array1::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        out[i] = (up - down) / (h + h);
    }
    out
}
