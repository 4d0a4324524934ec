//! Symmetric "banded plus dense border" matrices and their Cholesky factorization.
//!
//! Full-transcription Hessians have this arrow shape when the decision vector is
//! ordered time-major with the static parameters appended at the end: states of
//! neighbouring samples couple within a narrow band, and the parameters couple to
//! everything.

use crate::error::{Error, Result};

/// Symmetric matrix `[[B, E], [Eᵀ, C]]` with `B` banded (`nb × nb`, half
/// bandwidth `bw`), `E` dense `nb × m` and `C` dense `m × m`.
#[derive(Debug, Clone)]
pub struct BorderedBanded {
    nb: usize,
    bw: usize,
    m: usize,
    /// Lower band, row-major: `band[i*(bw+1) + d] = B[i][i-d]`.
    band: Vec<f64>,
    /// `border[i*m + c] = E[i][c]`.
    border: Vec<f64>,
    /// Full `m × m`.
    corner: Vec<f64>,
}

impl BorderedBanded {
    pub fn zeros(nb: usize, bw: usize, m: usize) -> Self {
        Self {
            nb,
            bw,
            m,
            band: vec![0.0; nb * (bw + 1)],
            border: vec![0.0; nb * m],
            corner: vec![0.0; m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.nb + self.m
    }

    pub fn clear(&mut self) {
        self.band.iter_mut().for_each(|v| *v = 0.0);
        self.border.iter_mut().for_each(|v| *v = 0.0);
        self.corner.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` to the symmetric pair `(i, j)`/`(j, i)` (once on the diagonal).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi < self.nb {
            debug_assert!(hi - lo <= self.bw, "entry ({i}, {j}) outside band");
            self.band[hi * (self.bw + 1) + (hi - lo)] += v;
        } else if lo < self.nb {
            self.border[lo * self.m + (hi - self.nb)] += v;
        } else {
            let (a, b) = (lo - self.nb, hi - self.nb);
            self.corner[a * self.m + b] += v;
            if a != b {
                self.corner[b * self.m + a] += v;
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi < self.nb {
            if hi - lo > self.bw {
                0.0
            } else {
                self.band[hi * (self.bw + 1) + (hi - lo)]
            }
        } else if lo < self.nb {
            self.border[lo * self.m + (hi - self.nb)]
        } else {
            self.corner[(lo - self.nb) * self.m + (hi - self.nb)]
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.diagonal(i).abs()).fold(0.0, f64::max)
    }

    /// Decouples the variables flagged in `fixed`: their rows and columns are
    /// zeroed and their diagonal set to one.
    pub fn fix_variables(&mut self, fixed: &[bool]) {
        let w = self.bw + 1;
        for i in 0..self.nb {
            if !fixed[i] {
                continue;
            }
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                self.band[i * w + (i - j)] = 0.0;
            }
            for r in i + 1..(i + self.bw + 1).min(self.nb) {
                self.band[r * w + (r - i)] = 0.0;
            }
            self.band[i * w] = 1.0;
            for c in 0..self.m {
                self.border[i * self.m + c] = 0.0;
            }
        }
        for c in 0..self.m {
            if !fixed[self.nb + c] {
                continue;
            }
            for i in 0..self.nb {
                self.border[i * self.m + c] = 0.0;
            }
            for b in 0..self.m {
                self.corner[c * self.m + b] = 0.0;
                self.corner[b * self.m + c] = 0.0;
            }
            self.corner[c * self.m + c] = 1.0;
        }
    }

    /// `out = self · x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        let (nb, m, bw) = (self.nb, self.m, self.bw);
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..nb {
            let row = &self.band[i * (bw + 1)..(i + 1) * (bw + 1)];
            out[i] += row[0] * x[i];
            for d in 1..=bw.min(i) {
                let j = i - d;
                out[i] += row[d] * x[j];
                out[j] += row[d] * x[i];
            }
            for c in 0..m {
                let e = self.border[i * m + c];
                out[i] += e * x[nb + c];
                out[nb + c] += e * x[i];
            }
        }
        for a in 0..m {
            for b in 0..m {
                out[nb + a] += self.corner[a * m + b] * x[nb + b];
            }
        }
    }

    /// Cholesky factorization of `self + shift·I`.
    pub fn factor(&self, shift: f64) -> Result<BorderedCholesky> {
        let (nb, bw, m) = (self.nb, self.bw, self.m);
        let w = bw + 1;
        let mut l = self.band.clone();
        for i in 0..nb {
            l[i * w] += shift;
        }
        for i in 0..nb {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = l[i * w + (i - j)];
                for k in lo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Numerical(format!(
                            "banded block not positive definite at pivot {i}"
                        )));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        let mut fac = BorderedCholesky {
            nb,
            bw,
            m,
            l,
            e: self.border.clone(),
            w_cols: vec![0.0; nb * m],
            schur: vec![0.0; m * m],
        };
        // W = B⁻¹E, column by column.
        let mut col = vec![0.0; nb];
        for c in 0..m {
            for i in 0..nb {
                col[i] = self.border[i * m + c];
            }
            fac.band_solve(&mut col);
            for i in 0..nb {
                fac.w_cols[i * m + c] = col[i];
            }
        }
        // S = C + shift·I − EᵀW
        let mut s = self.corner.clone();
        for a in 0..m {
            s[a * m + a] += shift;
        }
        for i in 0..nb {
            for a in 0..m {
                let e = self.border[i * m + a];
                if e == 0.0 {
                    continue;
                }
                for b in 0..m {
                    s[a * m + b] -= e * fac.w_cols[i * m + b];
                }
            }
        }
        // symmetrize against round-off before the dense factorization
        for a in 0..m {
            for b in 0..a {
                let v = 0.5 * (s[a * m + b] + s[b * m + a]);
                s[a * m + b] = v;
                s[b * m + a] = v;
            }
        }
        dense_cholesky(&mut s, m)?;
        fac.schur = s;
        Ok(fac)
    }
}

/// Factor of a [`BorderedBanded`] matrix via block elimination of the border.
#[derive(Debug, Clone)]
pub struct BorderedCholesky {
    nb: usize,
    bw: usize,
    m: usize,
    l: Vec<f64>,
    e: Vec<f64>,
    w_cols: Vec<f64>,
    schur: Vec<f64>,
}

impl BorderedCholesky {
    fn band_solve(&self, x: &mut [f64]) {
        let (nb, bw) = (self.nb, self.bw);
        let w = bw + 1;
        for i in 0..nb {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..nb).rev() {
            let mut s = x[i];
            for r in i + 1..(i + bw + 1).min(nb) {
                s -= self.l[r * w + (r - i)] * x[r];
            }
            x[i] = s / self.l[i * w];
        }
    }

    /// Solves in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (nb, m) = (self.nb, self.m);
        let (xb, xc) = x.split_at_mut(nb);
        // y = B⁻¹ r_b ; S x_c = r_c − Eᵀy ; x_b = y − W x_c
        self.band_solve(xb);
        for i in 0..nb {
            for c in 0..m {
                xc[c] -= self.e[i * m + c] * xb[i];
            }
        }
        dense_cholesky_solve(&self.schur, m, xc);
        for i in 0..nb {
            let mut s = 0.0;
            for c in 0..m {
                s += self.w_cols[i * m + c] * xc[c];
            }
            xb[i] -= s;
        }
    }
}

/// In-place lower Cholesky of a dense row-major `m × m` matrix.
pub fn dense_cholesky(a: &mut [f64], m: usize) -> Result<()> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Numerical(format!("dense block not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
        for k in j + 1..m {
            a[j * m + k] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` in place for a factor produced by [`dense_cholesky`].
pub fn dense_cholesky_solve(l: &[f64], m: usize, x: &mut [f64]) {
    for i in 0..m {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * m + k] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = x[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
}
