use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Rational, TransferMatrix, HURWITZ_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::{to_complex, CMat};

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SsRepr", into = "SsRepr")]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SsRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

fn from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, ncols_if_empty));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::ShapeMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<SsRepr> for StateSpace {
    type Error = Error;
    fn try_from(r: SsRepr) -> Result<Self> {
        let d = from_rows(&r.d, 0)?;
        let a = from_rows(&r.a, 0)?;
        let n = a.nrows();
        let b = if r.b.is_empty() { DMatrix::zeros(n, d.ncols()) } else { from_rows(&r.b, 0)? };
        let c = if r.c.is_empty() { DMatrix::zeros(d.nrows(), n) } else { from_rows(&r.c, n)? };
        StateSpace::new(a, b, c, d)
    }
}

impl From<StateSpace> for SsRepr {
    fn from(s: StateSpace) -> Self {
        SsRepr { a: to_rows(&s.a), b: to_rows(&s.b), c: to_rows(&s.c), d: to_rows(&s.d) }
    }
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let (p, m) = d.shape();
        if a.ncols() != n || b.shape() != (n, m) || c.shape() != (p, n) {
            return Err(Error::ShapeMismatch(format!(
                "A {:?}, B {:?}, C {:?}, D {:?} are inconsistent",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        if p != m || p == 0 {
            return Err(Error::ShapeMismatch(format!("D must be square and nonempty, got {p}x{m}")));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(crate::error::invalid("state-space matrices must be finite"));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn channels(&self) -> usize {
        self.d.nrows()
    }

    /// `C (jwI - A)^{-1} B + D`.
    pub fn freq_response(&self, w: f64) -> Result<CMat> {
        let n = self.states();
        if n == 0 {
            return Ok(to_complex(&self.d));
        }
        let m = CMat::identity(n, n) * Complex64::new(0.0, w) - to_complex(&self.a);
        let x = m.lu().solve(&to_complex(&self.b)).ok_or(Error::AtPole(w))?;
        Ok(to_complex(&self.c) * x + to_complex(&self.d))
    }

    /// Eigenvalue of `A` with the largest real part, if it violates the Hurwitz margin.
    pub fn unstable_eigenvalue(&self) -> Option<Complex64> {
        if self.states() == 0 {
            return None;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .copied()
            .filter(|z| z.re >= -HURWITZ_MARGIN)
            .max_by(|x, y| x.re.total_cmp(&y.re))
    }

    pub fn is_stable(&self) -> bool {
        self.unstable_eigenvalue().is_none()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|v| *v == 0.0)
    }

    /// Transfer matrix `C adj(sI - A) B / det(sI - A) + D` by the
    /// Faddeev-LeVerrier recursion. Entries share the characteristic
    /// polynomial as denominator and are not reduced.
    pub fn to_transfer(&self) -> Result<TransferMatrix> {
        let n = self.states();
        let m = self.channels();
        // char[k] is the coefficient of s^(n-k); char[0] = 1
        let mut charp = vec![1.0];
        let mut adj = Vec::with_capacity(n);
        let mut mk = DMatrix::<f64>::identity(n, n);
        for k in 1..=n {
            let am = &self.a * &mk;
            let ck = -am.trace() / k as f64;
            charp.push(ck);
            adj.push(mk);
            mk = am + DMatrix::identity(n, n) * ck;
        }
        let terms: Vec<DMatrix<f64>> = adj.iter().map(|mk| &self.c * mk * &self.b).collect();
        let scale = terms.iter().flat_map(|t| t.iter()).chain(self.d.iter()).map(|v| v.abs()).fold(0.0, f64::max);
        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let dij = self.d[(i, j)];
                let mut num: Vec<f64> = (0..=n)
                    .map(|k| dij * charp[k] + if k == 0 { 0.0 } else { terms[k - 1][(i, j)] })
                    .collect();
                for v in &mut num {
                    if v.abs() <= 1e-13 * scale {
                        *v = 0.0;
                    }
                }
                row.push(Rational::new(num, charp.clone())?);
            }
            rows.push(row);
        }
        TransferMatrix::new(rows)
    }
}

/// Controllable canonical form of one proper scalar entry:
/// `(A, b, c, d)` with `b = e_n`.
fn canonical(g: &Rational) -> (DMatrix<f64>, Vec<f64>, f64) {
    let den = g.den();
    let n = den.len() - 1;
    let lead = den[0];
    let a_coef: Vec<f64> = den[1..].iter().map(|v| v / lead).collect();
    let mut num = vec![0.0; n + 1 - g.num().len()];
    num.extend(g.num().iter().map(|v| v / lead));
    let d = num[0];
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        // last row: -a_n ... -a_1
        a[(n - 1, j)] = -a_coef[n - 1 - j];
    }
    let c: Vec<f64> = (0..n).map(|j| num[n - j] - a_coef[n - 1 - j] * d).collect();
    (a, c, d)
}

/// Per-entry controllable canonical realizations stacked block-diagonally.
/// Zero and constant entries contribute no states.
pub fn realize(p: &TransferMatrix) -> Result<StateSpace> {
    let nch = p.dim();
    let mut blocks = Vec::new();
    let mut d = DMatrix::zeros(nch, nch);
    for ((i, j), g) in p.entries() {
        if g.is_zero() {
            continue;
        }
        if g.den_degree() == 0 {
            d[(i, j)] = g.high_freq_limit();
            continue;
        }
        let (a, c, dij) = canonical(g);
        d[(i, j)] = dij;
        blocks.push((i, j, a, c));
    }
    let n: usize = blocks.iter().map(|b| b.2.nrows()).sum();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, nch);
    let mut c = DMatrix::zeros(nch, n);
    let mut off = 0;
    for (i, j, ab, cb) in blocks {
        let k = ab.nrows();
        a.view_mut((off, off), (k, k)).copy_from(&ab);
        b[(off + k - 1, j)] = 1.0;
        for (q, v) in cb.iter().enumerate() {
            c[(i, off + q)] = *v;
        }
        off += k;
    }
    StateSpace::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::lti::FrequencyGrid;
    use proptest::prelude::*;

    #[test]
    fn first_order_lag_realization() {
        let p = TransferMatrix::scalar(Rational::new(vec![1.0], vec![1.0, 1.0]).unwrap());
        let ss = realize(&p).unwrap();
        assert_eq!(ss.a().as_slice(), &[-1.0]);
        assert_eq!(ss.b().as_slice(), &[1.0]);
        assert_eq!(ss.c().as_slice(), &[1.0]);
        assert_eq!(ss.d().as_slice(), &[0.0]);
    }

    #[test]
    fn constant_realization_has_no_states() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let ss = realize(&TransferMatrix::constant(&k).unwrap()).unwrap();
        assert_eq!(ss.states(), 0);
        assert_eq!(ss.d(), &k);
    }

    #[test]
    fn mimo_plant_realization_matches_on_default_grid() {
        let p = bundled::mimo_plant();
        let ss = realize(&p).unwrap();
        assert_eq!(ss.states(), 8);
        assert!(ss.is_stable());
        for &w in FrequencyGrid::default().points() {
            let a = p.freq_response(w).unwrap();
            let b = ss.freq_response(w).unwrap();
            let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!((a - b).iter().all(|v| v.norm() <= 1e-8 * scale), "w = {w}");
        }
    }

    #[test]
    fn json_round_trip() {
        let ss = realize(&bundled::mimo_plant()).unwrap();
        let text = serde_json::to_string(&ss).unwrap();
        assert!(text.contains("\"A\""));
        let back: StateSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ss);
    }

    #[test]
    fn transfer_of_realization_matches_plant() {
        let p = bundled::mimo_plant();
        let back = realize(&p).unwrap().to_transfer().unwrap();
        for w in [0.0, 0.3, 1.0, 7.0, 100.0] {
            let a = p.freq_response(w).unwrap();
            let b = back.freq_response(w).unwrap();
            assert!((a - b).iter().all(|v| v.norm() < 1e-8), "w = {w}");
        }
        let lag = realize(&TransferMatrix::scalar(Rational::new(vec![1.0], vec![1.0, 1.0]).unwrap())).unwrap();
        let g = lag.to_transfer().unwrap();
        assert_eq!(g.entry(0, 0).num(), &[1.0]);
        assert_eq!(g.entry(0, 0).den(), &[1.0, 1.0]);
    }

    #[test]
    fn unstable_matrix_detected() {
        let ss = StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[0.5]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!((ss.unstable_eigenvalue().unwrap().re - 0.5).abs() < 1e-12);
    }

    fn stable_rational() -> impl Strategy<Value = Rational> {
        (1usize..=4, proptest::collection::vec(0.2f64..3.0, 4), proptest::collection::vec(-2.0f64..2.0, 5), any::<bool>())
            .prop_map(|(deg, poles, numc, proper)| {
                let mut den = vec![1.0];
                for p in poles.iter().take(deg) {
                    let mut next = vec![0.0; den.len() + 1];
                    for (k, c) in den.iter().enumerate() {
                        next[k] += c;
                        next[k + 1] += c * p;
                    }
                    den = next;
                }
                let nlen = if proper { deg + 1 } else { deg };
                Rational::new(numc[..nlen].to_vec(), den).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn realization_matches_response(g in stable_rational(), w in 0.0f64..50.0) {
            let p = TransferMatrix::scalar(g);
            let ss = realize(&p).unwrap();
            let a = p.freq_response(w).unwrap()[(0, 0)];
            let b = ss.freq_response(w).unwrap()[(0, 0)];
            prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-3));
        }

        #[test]
        fn response_is_conjugate_symmetric(g in stable_rational(), w in 0.0f64..100.0) {
            let a = g.freq(w).unwrap();
            let b = g.freq(-w).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1.0));
        }

        #[test]
        fn hinf_scales_linearly(g in stable_rational(), k in 0.1f64..10.0) {
            let grid = FrequencyGrid::log(1e-2, 1e2, 200).unwrap();
            let p = TransferMatrix::scalar(g);
            let h1 = p.hinf_norm(&grid).unwrap().value;
            let h2 = p.scaled(k).hinf_norm(&grid).unwrap().value;
            prop_assert!((h2 - k * h1).abs() <= 1e-9 * k * h1.max(1e-12));
        }
    }
}
