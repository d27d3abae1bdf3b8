//! Dense d×d matrix kernels on row-major slices, d = 2m ∈ {2, 4}.

/// out = a · b
pub fn mul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

pub fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    mul(a, b, &mut out, d);
    out
}

/// out = a·b − b·a
pub fn commutator(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut ab = vec![0.0; d * d];
    let mut ba = vec![0.0; d * d];
    mul(a, b, &mut ab, d);
    mul(b, a, &mut ba, d);
    for (x, y) in ab.iter_mut().zip(&ba) {
        *x -= y;
    }
    ab
}

pub fn transpose(a: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
    out
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
    out
}

pub fn trace(a: &[f64], d: usize) -> f64 {
    (0..d).map(|i| a[i * d + i]).sum()
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Max column sum, the matrix 1-norm.
pub fn norm1(a: &[f64], d: usize) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..d {
        let s: f64 = (0..d).map(|i| a[i * d + j].abs()).sum();
        best = best.max(s);
    }
    best
}

/// out = y = a · x
pub fn matvec(a: &[f64], x: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += a[i * d + j] * x[j];
        }
        out[i] = s;
    }
}

/// In-place Gauss–Jordan inverse with partial pivoting. Returns false when
/// the pivot collapses (singular input).
pub fn invert(a: &[f64], out: &mut [f64], d: usize) -> bool {
    let mut work = a.to_vec();
    out.copy_from_slice(&identity(d));
    for col in 0..d {
        let mut pivot = col;
        for row in col + 1..d {
            if work[row * d + col].abs() > work[pivot * d + col].abs() {
                pivot = row;
            }
        }
        if work[pivot * d + col].abs() < 1e-300 {
            return false;
        }
        if pivot != col {
            for j in 0..d {
                work.swap(col * d + j, pivot * d + j);
                out.swap(col * d + j, pivot * d + j);
            }
        }
        let inv_p = 1.0 / work[col * d + col];
        for j in 0..d {
            work[col * d + j] *= inv_p;
            out[col * d + j] *= inv_p;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let f = work[row * d + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..d {
                work[row * d + j] -= f * work[col * d + j];
                out[row * d + j] -= f * out[col * d + j];
            }
        }
    }
    true
}

/// Constant matrix Ω₀ = [[0, I_m], [−I_m, 0]] of the standard symplectic form
/// ω₀ = Σ dx_i ∧ dx_{m+i}; rows act on the first argument.
pub fn omega0(m: usize) -> Vec<f64> {
    let d = 2 * m;
    let mut out = vec![0.0; d * d];
    for i in 0..m {
        out[i * d + (m + i)] = 1.0;
        out[(m + i) * d + i] = -1.0;
    }
    out
}

/// Standard complex structure J₀ = [[0, −I_m], [I_m, 0]], satisfying
/// J₀ e_i = e_{m+i} and g₀ = Ω₀·J₀ = I.
pub fn j0(m: usize) -> Vec<f64> {
    let d = 2 * m;
    let mut out = vec![0.0; d * d];
    for i in 0..m {
        out[i * d + (m + i)] = -1.0;
        out[(m + i) * d + i] = 1.0;
    }
    out
}
