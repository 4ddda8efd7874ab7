use crate::error::{Error, Result};

/// Runge-Kutta coefficients `(A, b, c)` with optional embedded weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    stages: usize,
    /// Row-major `s × s`.
    a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub b_hat: Option<Vec<f64>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

impl ButcherTableau {
    /// Checks shapes and the row-sum condition `c_i = Σ_j A_ij`.
    pub fn new(
        name: &'static str,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        embedded: Option<(Vec<f64>, usize)>,
        order: usize,
    ) -> Result<ButcherTableau> {
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidTableau(format!("{name}: no stages")));
        }
        if a.len() != s || a.iter().any(|r| r.len() != s) || c.len() != s {
            return Err(Error::InvalidTableau(format!("{name}: inconsistent stage count")));
        }
        for (i, row) in a.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if (sum - c[i]).abs() > 1e-14 * scale {
                return Err(Error::InvalidTableau(format!(
                    "{name}: row {i} sums to {sum}, node is {}",
                    c[i]
                )));
            }
        }
        let (b_hat, embedded_order) = match embedded {
            Some((bh, p)) => {
                if bh.len() != s {
                    return Err(Error::InvalidTableau(format!("{name}: embedded weights length")));
                }
                (Some(bh), Some(p))
            }
            None => (None, None),
        };
        Ok(ButcherTableau {
            name,
            stages: s,
            a: a.into_iter().flatten().collect(),
            b,
            c,
            b_hat,
            order,
            embedded_order,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    /// `A` strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        (0..self.stages).all(|i| (i..self.stages).all(|j| self.a(i, j) == 0.0))
    }

    /// `A` lower triangular.
    pub fn is_diagonally_implicit(&self) -> bool {
        (0..self.stages).all(|i| (i + 1..self.stages).all(|j| self.a(i, j) == 0.0))
    }

    /// `b` equals the last row of `A`.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages;
        (0..s).all(|j| self.a(s - 1, j) == self.b[j])
    }

    pub fn forward_euler() -> ButcherTableau {
        Self::new("forward_euler", vec![vec![0.0]], vec![1.0], vec![0.0], None, 1).unwrap()
    }

    /// Classical four-stage method.
    pub fn rk4() -> ButcherTableau {
        Self::new(
            "rk4",
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
            None,
            4,
        )
        .unwrap()
    }

    /// Fehlberg 4(5): advances the fourth-order solution, estimates with
    /// the fifth-order one.
    pub fn rkf45() -> ButcherTableau {
        Self::new(
            "rkf45",
            vec![
                vec![0.0; 6],
                vec![0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0, 0.0],
                vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0, 0.0],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0, 0.0],
                vec![-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0, 0.0],
            ],
            vec![25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0],
            vec![0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5],
            Some((
                vec![
                    16.0 / 135.0,
                    0.0,
                    6656.0 / 12825.0,
                    28561.0 / 56430.0,
                    -9.0 / 50.0,
                    2.0 / 55.0,
                ],
                5,
            )),
            4,
        )
        .unwrap()
    }

    /// Bogacki-Shampine 3(2).
    pub fn bogacki_shampine() -> ButcherTableau {
        Self::new(
            "bogacki_shampine",
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.75, 0.0, 0.0],
                vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            ],
            vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            vec![0.0, 0.5, 0.75, 1.0],
            Some((vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125], 2)),
            3,
        )
        .unwrap()
    }

    pub fn backward_euler() -> ButcherTableau {
        Self::new("backward_euler", vec![vec![1.0]], vec![1.0], vec![1.0], None, 1).unwrap()
    }

    /// Implicit trapezoidal rule with an explicit first stage.
    pub fn trapezoidal() -> ButcherTableau {
        Self::new(
            "trapezoidal",
            vec![vec![0.0, 0.0], vec![0.5, 0.5]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            None,
            2,
        )
        .unwrap()
    }

    /// Two-stage, L-stable SDIRK with `γ = 1 − 1/√2`.
    pub fn sdirk2() -> ButcherTableau {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            "sdirk2",
            vec![vec![g, 0.0], vec![1.0 - g, g]],
            vec![1.0 - g, g],
            vec![g, 1.0],
            None,
            2,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tableaus_are_consistent() {
        for t in [
            ButcherTableau::forward_euler(),
            ButcherTableau::rk4(),
            ButcherTableau::rkf45(),
            ButcherTableau::bogacki_shampine(),
            ButcherTableau::backward_euler(),
            ButcherTableau::trapezoidal(),
            ButcherTableau::sdirk2(),
        ] {
            assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-14, "{}", t.name);
            if let Some(bh) = &t.b_hat {
                assert!((bh.iter().sum::<f64>() - 1.0).abs() < 1e-14, "{}", t.name);
            }
            assert!(t.is_diagonally_implicit());
        }
        assert!(ButcherTableau::rk4().is_explicit());
        assert!(ButcherTableau::sdirk2().is_stiffly_accurate());
        assert!(!ButcherTableau::rk4().is_stiffly_accurate());
        assert!(!ButcherTableau::sdirk2().is_explicit());
        assert!(!ButcherTableau::trapezoidal().is_explicit());
    }

    #[test]
    fn row_sum_violation_rejected() {
        let bad = ButcherTableau::new(
            "bad",
            vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            None,
            2,
        );
        assert!(matches!(bad, Err(Error::InvalidTableau(_))));
        let ragged = ButcherTableau::new("r", vec![vec![0.0]], vec![0.5, 0.5], vec![0.0, 1.0], None, 1);
        assert!(ragged.is_err());
    }
}
