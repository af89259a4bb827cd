//! Coordinate charts: affine changes of frame, the tamed normalization
//! `z = d_t ∘ φ ∘ (frame)`, and the J-holomorphy coefficient `Q`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acs::{deviation_pointwise, extract_h, normalization, StructureField, FD_STEP};
use crate::error::{Error, Result};
use crate::levi::scalar::ScalarField;
use crate::linalg::{self, blocks, cinverse, cop_norm, j_st, op_norm, CMat, CVector, Mat, Vector};
use crate::region::{DomainSpec, Region};

/// A coordinate map `z` on a neighbourhood in R^{2n}.
pub trait Chart: Send + Sync {
    fn dim(&self) -> usize;
    fn forward(&self, q: &[f64]) -> Vec<f64>;
    fn inverse(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `dz_q`.
    fn differential(&self, q: &[f64]) -> Mat;
    /// The structure `z_*J` in chart coordinates.
    fn structure(&self) -> StructureField;
    /// Pull a scalar field on the base to chart coordinates: `u ∘ z^{-1}`.
    fn pull_scalar(&self, u: &ScalarField) -> ScalarField;
    /// `q -> |z(q)|²` as a field on the base.
    fn squared_norm_field(&self) -> ScalarField;
}

/// `P^{-1} J(P x + offset) P`.
pub fn pushforward(j: &StructureField, p: &Mat) -> Result<StructureField> {
    j.pushforward_affine(p, &vec![0.0; j.dim()])
}

/// Frame `P_p = (e_1..e_n, J_p e_1..J_p e_n)`; `P_p^{-1} J_p P_p = J_st`.
pub fn frame_matrix(j: &Mat) -> Mat {
    let dim = j.nrows();
    let n = dim / 2;
    let mut p = Mat::zeros(dim, dim);
    for c in 0..n {
        p[(c, c)] = 1.0;
        for r in 0..dim {
            p[(r, n + c)] = j[(r, c)];
        }
    }
    p
}

/// `z(q) = M (q - center)`.
#[derive(Clone, Debug)]
pub struct AffineChart {
    pub m: Mat,
    pub m_inv: Mat,
    pub center: Vec<f64>,
    pushed: StructureField,
}

impl AffineChart {
    pub fn new(j: &StructureField, m: Mat, center: Vec<f64>) -> Result<Self> {
        let m_inv = linalg::inverse(&m, "chart matrix")?;
        let pushed = j.pushforward_affine(&m_inv, &center)?;
        Ok(AffineChart {
            m,
            m_inv,
            center,
            pushed,
        })
    }

    pub fn identity(j: &StructureField) -> Self {
        let dim = j.dim();
        Self::new(j, Mat::identity(dim, dim), vec![0.0; dim]).expect("identity chart")
    }
}

impl Chart for AffineChart {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn forward(&self, q: &[f64]) -> Vec<f64> {
        let d = Vector::from_iterator(q.len(), q.iter().zip(&self.center).map(|(a, c)| a - c));
        (&self.m * d).iter().copied().collect()
    }
    fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = &self.m_inv * Vector::from_column_slice(x);
        Ok(v.iter().zip(&self.center).map(|(a, c)| a + c).collect())
    }
    fn differential(&self, _q: &[f64]) -> Mat {
        self.m.clone()
    }
    fn structure(&self) -> StructureField {
        self.pushed.clone()
    }
    fn pull_scalar(&self, u: &ScalarField) -> ScalarField {
        u.compose_affine(self.m_inv.clone(), self.center.clone())
    }
    fn squared_norm_field(&self) -> ScalarField {
        ScalarField::squared_norm(vec![0.0; self.dim()]).compose_affine(
            self.m.clone(),
            (-(&self.m * Vector::from_column_slice(&self.center))).iter().copied().collect(),
        )
    }
}

/// The normalization `φ` of a structure with `J(0) = J_st`, its inverse and differential.
#[derive(Clone, Debug)]
struct Normalizer {
    framed: StructureField,
}

impl Normalizer {
    fn n(&self) -> usize {
        self.framed.n()
    }

    fn forward(&self, w: &[f64]) -> Result<Vec<f64>> {
        normalization(&self.framed.value(w), w)
    }

    /// Solves `φ(w) = x*` by the fixed point `y = C(w) y*`, `x = x* + A(w) y*`.
    fn inverse(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut w = xs.to_vec();
        for _ in 0..200 {
            let (a, _, c, _) = blocks(&self.framed.value(&w));
            let ys = Vector::from_column_slice(&xs[n..]);
            let y = &c * &ys;
            let x = Vector::from_column_slice(&xs[..n]) + &a * &ys;
            let next: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
            let delta = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            w = next;
            if delta <= 1e-15 * (1.0 + xs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Ok(w);
            }
        }
        let back = self.forward(&w)?;
        let err = back.iter().zip(xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err < 1e-12 {
            Ok(w)
        } else {
            Err(Error::CannotTame(format!("normalization is not invertible near {xs:?}")))
        }
    }

    /// `dφ_w = [[I, -M], [0, N]]` plus the columns `(-(∂_c M) y, (∂_c N) y)`,
    /// with `M = A C^{-1}`, `N = C^{-1}`.
    fn differential(&self, w: &[f64]) -> Result<Mat> {
        let n = self.n();
        let (jv, dj) = self.framed.jet(w);
        let (a, _, c, _) = blocks(&jv);
        let nn = c
            .try_inverse()
            .ok_or_else(|| Error::SingularBlock("C block is not invertible".into()))?;
        let mm = &a * &nn;
        let y = Vector::from_column_slice(&w[n..]);
        let mut g = Mat::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).fill_with_identity();
        g.view_mut((0, n), (n, n)).copy_from(&(-&mm));
        g.view_mut((n, n), (n, n)).copy_from(&nn);
        for (col, djc) in dj.iter().enumerate() {
            let (da, _, dc, _) = blocks(djc);
            let dn = -(&nn * dc * &nn);
            let dm = da * &nn + &a * &dn;
            let top = -(dm * &y);
            let bottom = dn * &y;
            for i in 0..n {
                g[(i, col)] += top[i];
                g[(n + i, col)] += bottom[i];
            }
        }
        Ok(g)
    }

    /// `(φ_*J)(x*) = dφ_w J(w) dφ_w^{-1}` with `w = φ^{-1}(x*)`.
    fn pushed_value(&self, xs: &[f64]) -> Result<Mat> {
        let w = self.inverse(xs)?;
        let g = self.differential(&w)?;
        let g_inv = linalg::inverse(&g, "normalization differential")?;
        Ok(&g * self.framed.value(&w) * g_inv)
    }
}

/// Options for [`build_tamed_chart`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TameOptions {
    /// Grid count per axis for the C¹ check on the unit ball.
    pub resolution: usize,
    /// Smallest admissible dilation exponent: `t >= 2^{-max_halvings}`.
    pub max_halvings: u32,
}

impl Default for TameOptions {
    fn default() -> Self {
        TameOptions {
            resolution: 0,
            max_halvings: 20,
        }
    }
}

/// A tamed chart `z = d_t ∘ φ ∘ (q -> P_p^{-1}(q - p))`.
#[derive(Clone)]
pub struct TamedChart {
    pub base: StructureField,
    pub anchor: Vec<f64>,
    pub frame: Mat,
    pub frame_inv: Mat,
    pub t: f64,
    pub epsilon: f64,
    /// Measured sup of `max(|z_*J - J_st|, |Q|) / (ε |y*|)`.
    pub taming_constant: f64,
    /// `|z_*J - J_st|_{C¹}` on the unit ball samples.
    pub deviation_c1: f64,
    /// Largest `|y*|` of images of sampled points of `E = {y = 0}`.
    pub slice_residual: f64,
    normalizer: Arc<Normalizer>,
    pushed: StructureField,
}

impl std::fmt::Debug for TamedChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TamedChart")
            .field("anchor", &self.anchor)
            .field("t", &self.t)
            .field("epsilon", &self.epsilon)
            .field("taming_constant", &self.taming_constant)
            .finish()
    }
}

fn pushed_structure(normalizer: Arc<Normalizer>, t: f64) -> StructureField {
    let n = normalizer.n();
    StructureField::callable(
        n,
        Arc::new(move |x: &[f64]| {
            let xs: Vec<f64> = x.iter().map(|v| v * t).collect();
            normalizer
                .pushed_value(&xs)
                .unwrap_or_else(|_| Mat::from_element(2 * n, 2 * n, f64::NAN))
        }),
        FD_STEP,
    )
}

/// Builds a tamed chart at `p ∈ E = {y = 0}`: frame change so that the
/// structure is standard at the origin, normalization φ, then the largest
/// dilation `t ∈ {1, 1/2, 1/4, ...}` with `|z_*J - J_st|_{C¹} <= ε` on the unit ball.
pub fn build_tamed_chart(j: &StructureField, p: &[f64], epsilon: f64, opts: &TameOptions) -> Result<TamedChart> {
    let n = j.n();
    let dim = 2 * n;
    if p.len() != dim {
        return Err(Error::Dimension("anchor dimension".into()));
    }
    if p[n..].iter().any(|v| v.abs() > 1e-12) {
        return Err(Error::PreconditionFailed(format!("anchor {p:?} is not on E = {{y = 0}}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive(epsilon));
    }
    let jp = j.value(p);
    let frame = frame_matrix(&jp);
    let frame_inv = linalg::inverse(&frame, "frame P_p").map_err(|_| Error::SingularBlock("frame P_p is singular".into()))?;
    let framed = j.pushforward_affine(&frame, p)?;
    // block extraction must succeed at the origin
    crate::acs::block_form_of(&framed.value(&vec![0.0; dim]))?;
    let normalizer = Arc::new(Normalizer { framed });
    let res = if opts.resolution >= 2 {
        opts.resolution
    } else {
        match dim {
            2 => 21,
            4 => 7,
            _ => 5,
        }
    };
    let ball = DomainSpec::ball_with_resolution(vec![0.0; dim], 1.0, res)?;
    let samples = ball.samples();
    let mut t = 1.0;
    let mut chosen = None;
    for _ in 0..=opts.max_halvings {
        let pushed = pushed_structure(normalizer.clone(), t);
        let mut worst: f64 = 0.0;
        for x in &samples {
            let (_, n1) = deviation_pointwise(&pushed, x);
            worst = worst.max(if n1.is_finite() { n1 } else { f64::INFINITY });
            if worst > epsilon {
                break;
            }
        }
        if worst <= epsilon {
            chosen = Some((pushed, worst));
            break;
        }
        t *= 0.5;
    }
    let (pushed, dev) = chosen.ok_or_else(|| {
        Error::CannotTame(format!(
            "|z_*J - J_st|_C1 stays above ε = {epsilon:.3e} for every t >= 2^-{}",
            opts.max_halvings
        ))
    })?;
    let mut chart = TamedChart {
        base: j.clone(),
        anchor: p.to_vec(),
        frame,
        frame_inv,
        t,
        epsilon,
        taming_constant: 0.0,
        deviation_c1: dev,
        slice_residual: 0.0,
        normalizer,
        pushed,
    };
    let mut c: f64 = 0.0;
    for x in &samples {
        let ys = x[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if ys < 1e-9 {
            continue;
        }
        let jd = op_norm(&(chart.pushed.value(x) - j_st(n)));
        let qn = chart.q_real(x).map(|q| cop_norm(&q)).unwrap_or(f64::INFINITY);
        c = c.max(jd.max(qn) / (epsilon * ys));
    }
    chart.taming_constant = c;
    let mut slice: f64 = 0.0;
    for x in &samples {
        let e_point: Vec<f64> = x[..n].iter().copied().chain(std::iter::repeat_n(0.0, n)).collect();
        if let Ok(q) = chart.inverse(&e_point) {
            let mut on_e = q.clone();
            for v in on_e[n..].iter_mut() {
                *v = 0.0;
            }
            let image = chart.forward(&on_e);
            slice = slice.max(image[n..].iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }
    chart.slice_residual = slice;
    Ok(chart)
}

impl TamedChart {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// `Q` at the chart point `x` (real coordinates).
    pub fn q_real(&self, x: &[f64]) -> Result<CMat> {
        q_from_structure(&self.pushed.value(x), x)
    }

    /// Export of the reproducibility data.
    pub fn export(&self) -> ChartExport {
        ChartExport {
            anchor: self.anchor.clone(),
            frame: self.frame.iter().copied().collect(),
            frame_rows: self.frame.nrows(),
            dilation: self.t,
            epsilon: self.epsilon,
            taming_constant: self.taming_constant,
            deviation_c1: self.deviation_c1,
            slice_residual: self.slice_residual,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartExport {
    pub anchor: Vec<f64>,
    /// Column-major frame matrix.
    pub frame: Vec<f64>,
    pub frame_rows: usize,
    pub dilation: f64,
    pub epsilon: f64,
    pub taming_constant: f64,
    pub deviation_c1: f64,
    pub slice_residual: f64,
}

impl Chart for TamedChart {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn forward(&self, q: &[f64]) -> Vec<f64> {
        let d = Vector::from_iterator(q.len(), q.iter().zip(&self.anchor).map(|(a, c)| a - c));
        let w: Vec<f64> = (&self.frame_inv * d).iter().copied().collect();
        match self.normalizer.forward(&w) {
            Ok(v) => v.iter().map(|x| x / self.t).collect(),
            Err(_) => vec![f64::NAN; q.len()],
        }
    }

    fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs: Vec<f64> = x.iter().map(|v| v * self.t).collect();
        let w = self.normalizer.inverse(&xs)?;
        let q = &self.frame * Vector::from_column_slice(&w);
        Ok(q.iter().zip(&self.anchor).map(|(a, c)| a + c).collect())
    }

    fn differential(&self, q: &[f64]) -> Mat {
        let d = Vector::from_iterator(q.len(), q.iter().zip(&self.anchor).map(|(a, c)| a - c));
        let w: Vec<f64> = (&self.frame_inv * d).iter().copied().collect();
        match self.normalizer.differential(&w) {
            Ok(g) => g * &self.frame_inv / self.t,
            Err(_) => Mat::from_element(q.len(), q.len(), f64::NAN),
        }
    }

    fn structure(&self) -> StructureField {
        self.pushed.clone()
    }

    fn pull_scalar(&self, u: &ScalarField) -> ScalarField {
        let chart = self.clone();
        let u = u.clone();
        ScalarField::callable(
            self.dim(),
            Arc::new(move |x: &[f64]| match chart.inverse(x) {
                Ok(q) => u.value(&q),
                Err(_) => f64::NAN,
            }),
            1e-6,
        )
    }

    fn squared_norm_field(&self) -> ScalarField {
        let chart = self.clone();
        ScalarField::callable(
            self.dim(),
            Arc::new(move |q: &[f64]| chart.forward(q).iter().map(|v| v * v).sum()),
            1e-6,
        )
    }
}

/// `Q = (2I - iH)^{-1} (iH)` for the structure matrix `j`, where `H` gives
/// the (1,0)-forms `dz + H dy`. The disc equation reads `∂̄g + Q conj(∂g) = 0`.
pub fn q_from_structure(j: &Mat, at: &[f64]) -> Result<CMat> {
    let n = j.nrows() / 2;
    let h = extract_h(j)?;
    let lead = CMat::from_diagonal_element(n, n, Complex64::new(2.0, 0.0)) - h.map(|z| z * Complex64::i());
    let lead_inv = cinverse(&lead, "leading matrix").map_err(|_| Error::SingularLeadingMatrix(at.to_vec()))?;
    Ok(lead_inv * h.map(|z| z * Complex64::i()))
}

/// `Q` of a chart at the chart point `x`.
pub fn q_coefficient(chart: &dyn Chart, x: &[f64]) -> Result<CMat> {
    q_from_structure(&chart.structure().value(x), x)
}

/// The real block system: `L (∂h) + T (∂̄h)` with
/// `L = [[I - C⁻¹, -AC⁻¹], [-AC⁻¹, -I + C⁻¹]]`,
/// `T = [[I + C⁻¹, -AC⁻¹], [AC⁻¹, I + C⁻¹]]`, blocks of `j` at `h(ζ)`.
/// Inputs are complex vectors `∂h`, `∂̄h` in C^n ≅ R^{2n}.
pub fn raw_system(j: &Mat, dh: &CVector, dbar_h: &CVector) -> Result<Vector> {
    let n = j.nrows() / 2;
    let (a, _, c, _) = blocks(j);
    let c_inv = c
        .try_inverse()
        .ok_or_else(|| Error::SingularBlock("C block is not invertible".into()))?;
    let id = Mat::identity(n, n);
    let ac = &a * &c_inv;
    let lead = linalg::from_blocks(&(&id - &c_inv), &(-&ac), &(-&ac), &(&c_inv - &id));
    let trail = linalg::from_blocks(&(&id + &c_inv), &(-&ac), &ac, &(&id + &c_inv));
    Ok(lead * linalg::to_real(dh) + trail * linalg::to_real(dbar_h))
}

// --- the disc-equation coefficient ------------------------------------------

/// A coefficient field for `∂̄g + q(g) conj(∂g) = 0` on C^n.
pub trait Coefficient: Send + Sync {
    fn n(&self) -> usize;
    fn q(&self, w: &CVector) -> Result<CMat>;
}

/// `q ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroCoefficient(pub usize);

impl Coefficient for ZeroCoefficient {
    fn n(&self) -> usize {
        self.0
    }
    fn q(&self, _w: &CVector) -> Result<CMat> {
        Ok(CMat::zeros(self.0, self.0))
    }
}

impl Coefficient for TamedChart {
    fn n(&self) -> usize {
        self.base.n()
    }
    fn q(&self, w: &CVector) -> Result<CMat> {
        let x = linalg::to_real(w);
        self.q_real(x.as_slice())
    }
}

/// The coefficient of any structure given directly in disc coordinates.
#[derive(Clone, Debug)]
pub struct StructureCoefficient(pub StructureField);

impl Coefficient for StructureCoefficient {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn q(&self, w: &CVector) -> Result<CMat> {
        let x = linalg::to_real(w);
        q_from_structure(&self.0.value(x.as_slice()), x.as_slice())
    }
}

/// `s · q`.
pub struct Scaled<C: Coefficient> {
    pub inner: C,
    pub factor: f64,
}

impl<C: Coefficient> Coefficient for Scaled<C> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn q(&self, w: &CVector) -> Result<CMat> {
        Ok(self.inner.q(w)? * Complex64::new(self.factor, 0.0))
    }
}

impl<C: Coefficient + ?Sized> Coefficient for Arc<C> {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn q(&self, w: &CVector) -> Result<CMat> {
        (**self).q(w)
    }
}

impl<C: Coefficient + ?Sized> Coefficient for &C {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn q(&self, w: &CVector) -> Result<CMat> {
        (**self).q(w)
    }
}

/// Sup over samples of the unit ball with `y* ≠ 0` of `|q| / |y*|`.
pub fn taming_ratio(q: &dyn Coefficient, resolution: usize) -> Result<f64> {
    let n = q.n();
    let ball = DomainSpec::ball_with_resolution(vec![0.0; 2 * n], 1.0, resolution)?;
    let mut worst: f64 = 0.0;
    for x in ball.samples() {
        let ys = x[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if ys < 1e-9 {
            continue;
        }
        let w = linalg::to_complex(&x);
        worst = worst.max(cop_norm(&q.q(&w)?) / ys);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acs::{structure_from_h, HField, H_CAP};
    use crate::poly::{ComplexPolyMatrix, Polynomial};

    fn perturbed(amplitude: f64) -> StructureField {
        let mut h = ComplexPolyMatrix::zeros(1);
        h.re.set(0, 0, Polynomial::monomial(vec![1, 1], amplitude).add(&Polynomial::monomial(vec![0, 1], 0.5 * amplitude)));
        h.im.set(0, 0, Polynomial::monomial(vec![1, 0], amplitude).add(&Polynomial::monomial(vec![0, 2], amplitude)));
        structure_from_h(HField::Poly(h), &DomainSpec::ball_with_resolution(vec![0.0; 2], 1.0, 9).unwrap(), H_CAP).unwrap()
    }

    #[test]
    fn frame_standardizes() {
        let j = perturbed(0.1);
        let p = [0.3, 0.0];
        let jp = j.value(&p);
        let f = frame_matrix(&jp);
        let inv = f.clone().try_inverse().unwrap();
        assert!((inv * jp * f - j_st(1)).norm() < 1e-12);
        assert_eq!(frame_matrix(&j_st(2)), Mat::identity(4, 4));
    }

    #[test]
    fn normalization_inverse_and_differential() {
        let j = perturbed(0.05);
        let chart = build_tamed_chart(&j, &[0.0, 0.0], 0.5, &TameOptions::default()).unwrap();
        let q = [0.1, 0.07];
        let x = chart.forward(&q);
        let back = chart.inverse(&x).unwrap();
        assert!((back[0] - q[0]).abs() < 1e-12 && (back[1] - q[1]).abs() < 1e-12);
        let dz = chart.differential(&q);
        let h = 1e-6;
        for k in 0..2 {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[k] += h;
            qm[k] -= h;
            let fp = chart.forward(&qp);
            let fm = chart.forward(&qm);
            for i in 0..2 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - dz[(i, k)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn normalized_structure_is_standard_on_slice() {
        let j = perturbed(0.05);
        let chart = build_tamed_chart(&j, &[0.0, 0.0], 0.5, &TameOptions::default()).unwrap();
        let s = chart.structure();
        for x in [-0.5, 0.0, 0.4] {
            assert!((s.value(&[x, 0.0]) - j_st(1)).norm() < 1e-10);
            assert!(cop_norm(&chart.q_real(&[x, 0.0]).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn raw_system_is_complex_form_times_leading() {
        let j = perturbed(0.1).value(&[0.2, 0.1]);
        let q = q_from_structure(&j, &[0.2, 0.1]).unwrap();
        let dh = CVector::from_vec(vec![Complex64::new(0.3, -0.2)]);
        // choose ∂̄h solving the complex equation
        let dbar = -(&q * dh.map(|z| z.conj()));
        let r = raw_system(&j, &dh, &dbar).unwrap();
        assert!(r.norm() < 1e-14);
    }
}
