//! Single-qubit matrices, axis Paulis and rotations.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ALGEBRA_TOL;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// A 2×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn pauli_x() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Mat2::new(ZERO, C64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Mat2::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    pub fn hadamard() -> Self {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        Mat2::new(h, h, h, -h)
    }

    /// Rank-1 projector `|v⟩⟨v|`.
    pub fn projector(v: [C64; 2]) -> Self {
        Mat2([
            [v[0] * v[0].conj(), v[0] * v[1].conj()],
            [v[1] * v[0].conj(), v[1] * v[1].conj()],
        ])
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// Deviation of `U†U` from the identity in max-entry norm.
    pub fn unitarity_defect(&self) -> f64 {
        (self.dagger() * *self).max_abs_diff(&Mat2::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Frobenius inner product `Tr(self† other)`.
    pub fn inner(&self, other: &Mat2) -> C64 {
        (self.dagger() * *other).trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

/// Unit axis `n` defining the Pauli operator `σ_n = n·σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct PauliAxis {
    x: f64,
    y: f64,
    z: f64,
}

impl PauliAxis {
    pub const X: PauliAxis = PauliAxis { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: PauliAxis = PauliAxis { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: PauliAxis = PauliAxis { x: 0.0, y: 0.0, z: 1.0 };

    /// Rejects axes whose norm differs from one by more than `1e-12`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidAxis(x, y, z));
        }
        Ok(PauliAxis { x, y, z })
    }

    /// Scales `(x, y, z)` onto the unit sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::InvalidAxis(x, y, z));
        }
        Ok(PauliAxis {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Axis from spherical angles.
    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        PauliAxis {
            x: polar.sin() * azimuth.cos(),
            y: polar.sin() * azimuth.sin(),
            z: polar.cos(),
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// `x·σ_x + y·σ_y + z·σ_z`.
    pub fn matrix(&self) -> Mat2 {
        Mat2::new(
            C64::new(self.z, 0.0),
            C64::new(self.x, -self.y),
            C64::new(self.x, self.y),
            C64::new(-self.z, 0.0),
        )
    }
}

impl TryFrom<[f64; 3]> for PauliAxis {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        PauliAxis::new(v[0], v[1], v[2])
    }
}

impl From<PauliAxis> for [f64; 3] {
    fn from(a: PauliAxis) -> Self {
        a.components()
    }
}

pub fn pauli_axis_matrix(axis: &PauliAxis) -> Mat2 {
    axis.matrix()
}

/// `e^{iα σ_n} = cos α I + i sin α σ_n`.
pub fn rotation(axis: &PauliAxis, alpha: f64) -> Mat2 {
    Mat2::identity().scale(C64::new(alpha.cos(), 0.0)) + axis.matrix().scale(C64::new(0.0, alpha.sin()))
}
