//! Matrix exponential via scaling-and-squaring with the order-13 Padé
//! approximant (Higham's coefficients). Relative error ≤ 1e−13 for ‖A‖ ≤ 10.

use super::smat;
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Norm guard: exp of anything this large overflows the squaring phase
/// long before it is useful on a compact torus.
pub const EXP_NORM_GUARD: f64 = 100.0;

/// exp(A) for a d×d row-major matrix.
pub fn matrix_exp(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix_exp input".into()));
    }
    let norm = smat::norm1(a, d);
    if norm > EXP_NORM_GUARD {
        return Err(Error::ExpOverflow {
            norm,
            guard: EXP_NORM_GUARD,
        });
    }
    if norm == 0.0 {
        return Ok(smat::identity(d));
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let a1: Vec<f64> = a.iter().map(|v| v * scale).collect();

    let a2 = smat::matmul(&a1, &a1, d);
    let a4 = smat::matmul(&a2, &a2, d);
    let a6 = smat::matmul(&a2, &a4, d);
    let eye = smat::identity(d);

    // U = A·[A6·(b13·A6 + b11·A4 + b9·A2) + b7·A6 + b5·A4 + b3·A2 + b1·I]
    let mut inner = vec![0.0; d * d];
    for i in 0..d * d {
        inner[i] = PADE13[13] * a6[i] + PADE13[11] * a4[i] + PADE13[9] * a2[i];
    }
    let mut u = smat::matmul(&a6, &inner, d);
    for i in 0..d * d {
        u[i] += PADE13[7] * a6[i] + PADE13[5] * a4[i] + PADE13[3] * a2[i] + PADE13[1] * eye[i];
    }
    let u = smat::matmul(&a1, &u, d);

    // V = A6·(b12·A6 + b10·A4 + b8·A2) + b6·A6 + b4·A4 + b2·A2 + b0·I
    for i in 0..d * d {
        inner[i] = PADE13[12] * a6[i] + PADE13[10] * a4[i] + PADE13[8] * a2[i];
    }
    let mut v = smat::matmul(&a6, &inner, d);
    for i in 0..d * d {
        v[i] += PADE13[6] * a6[i] + PADE13[4] * a4[i] + PADE13[2] * a2[i] + PADE13[0] * eye[i];
    }

    // Solve (V − U)·X = (V + U).
    let mut vmu = vec![0.0; d * d];
    let mut vpu = vec![0.0; d * d];
    for i in 0..d * d {
        vmu[i] = v[i] - u[i];
        vpu[i] = v[i] + u[i];
    }
    let mut vmu_inv = vec![0.0; d * d];
    if !smat::invert(&vmu, &mut vmu_inv, d) {
        return Err(Error::Singular("matrix_exp Padé denominator"));
    }
    let mut x = smat::matmul(&vmu_inv, &vpu, d);

    for _ in 0..squarings {
        x = smat::matmul(&x, &x, d);
    }
    Ok(x)
}
