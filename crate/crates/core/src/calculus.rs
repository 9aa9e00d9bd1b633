//! Exterior calculus on an ambient `R^N`: scalar fields, vector fields,
//! differential forms with symbolic coefficients, and smooth maps.
//!
//! Forms are sparse maps from increasing multi-indices to coefficient
//! expressions. A basis element `dx_I` evaluates on vectors as the
//! determinant of the rows `I`, so `(dx_i ^ dx_j)(u, v) = u_i v_j - u_j v_i`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Expr, Params, Var};
use crate::flow;
use crate::linalg;

/// A smooth function on the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub dim: usize,
    pub expr: Expr,
}

impl ScalarField {
    pub fn new(dim: usize, expr: Expr) -> Self {
        ScalarField { dim, expr }
    }

    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        Ok(ScalarField {
            dim,
            expr: Expr::parse_in(text, dim)?,
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        check_point(self.dim, p)?;
        Ok(self.expr.eval(p)?)
    }

    pub fn differential(&self) -> KForm {
        KForm::exact(self.dim, &self.expr)
    }

    pub fn gradient_at(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.differential().covector_at(p)
    }
}

fn check_point(dim: usize, p: &[f64]) -> Result<()> {
    if p.len() != dim {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, expected {dim}",
            p.len()
        )));
    }
    Ok(())
}

/// A vector field with symbolic components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub dim: usize,
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> Self {
        VectorField {
            dim: comps.len(),
            comps,
        }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField::new(vec![Expr::zero(); dim])
    }

    pub fn parse(dim: usize, comps: &[&str]) -> Result<Self> {
        if comps.len() != dim {
            return Err(Error::Dimension(format!(
                "{} components given for dimension {dim}",
                comps.len()
            )));
        }
        let comps = comps
            .iter()
            .map(|c| Expr::parse_in(c, dim))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(VectorField { dim, comps })
    }

    /// Coordinate field `d/dx_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut comps = vec![Expr::zero(); dim];
        comps[i] = Expr::one();
        VectorField::new(comps)
    }

    pub fn at(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.at_with(p, Params::default())
    }

    pub fn at_with(&self, p: &[f64], params: Params) -> Result<DVector<f64>> {
        check_point(self.dim, p)?;
        let mut v = DVector::zeros(self.dim);
        for (i, c) in self.comps.iter().enumerate() {
            v[i] = c.eval_with(p, params)?;
        }
        Ok(v)
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            self.comps
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| c * f.diff(Var::Coord(k))),
        )
    }

    pub fn bracket(&self, other: &VectorField) -> VectorField {
        let comps = (0..self.dim)
            .map(|i| self.apply(&other.comps[i]) - other.apply(&self.comps[i]))
            .collect();
        VectorField::new(comps)
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField::new(self.comps.iter().map(|c| f * c).collect())
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Symbolic Jacobian `dX^i/dx_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.comps
            .iter()
            .map(|c| (0..self.dim).map(|j| c.diff(Var::Coord(j))).collect())
            .collect()
    }

    pub fn shift(&self, offset: usize, dim: usize) -> VectorField {
        let mut comps = vec![Expr::zero(); dim];
        for (i, c) in self.comps.iter().enumerate() {
            comps[i + offset] = c.shift_coords(offset);
        }
        VectorField::new(comps)
    }

    /// Flow map `phi_t(p)` and its Jacobian, by RK4.
    pub fn flow(&self, p: &[f64], t: f64, steps: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let jac = self.jacobian();
        let f = |x: &DVector<f64>| self.at(x.as_slice());
        let j = |x: &DVector<f64>| eval_matrix(&jac, x.as_slice());
        flow::rk4_with_jacobian(f, j, &DVector::from_column_slice(p), t, steps)
    }
}

/// Evaluates a matrix of expressions.
pub fn eval_matrix(m: &[Vec<Expr>], p: &[f64]) -> Result<DMatrix<f64>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut out = DMatrix::zeros(rows, cols);
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if !e.is_zero() {
                out[(i, j)] = e.eval(p)?;
            }
        }
    }
    Ok(out)
}

/// A differential form of fixed degree on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    dim: usize,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

/// Sign of the permutation sorting `idx`, or `None` if an index repeats.
fn sort_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        KForm {
            dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 form.
    pub fn function(dim: usize, f: Expr) -> Self {
        KForm::from_terms(dim, 0, vec![(vec![], f)])
    }

    /// Builds a form from possibly unsorted index tuples; repeated indices vanish.
    pub fn from_terms(dim: usize, degree: usize, terms: Vec<(Vec<usize>, Expr)>) -> Self {
        let mut out = KForm::zero(dim, degree);
        for (mut idx, c) in terms {
            assert_eq!(idx.len(), degree, "index length must equal the degree");
            assert!(idx.iter().all(|&i| i < dim), "index out of range");
            if let Some(sign) = sort_sign(&mut idx) {
                let c = if sign < 0.0 { -c } else { c };
                out.add_term(idx, c);
            }
        }
        out
    }

    /// One-form `sum_i c_i dx_i`.
    pub fn one_form(coeffs: Vec<Expr>) -> Self {
        let dim = coeffs.len();
        KForm::from_terms(
            dim,
            1,
            coeffs.into_iter().enumerate().map(|(i, c)| (vec![i], c)).collect(),
        )
    }

    /// `df` for a function `f`.
    pub fn exact(dim: usize, f: &Expr) -> Self {
        KForm::function(dim, f.clone()).d()
    }

    fn add_term(&mut self, idx: Vec<usize>, c: Expr) {
        if c.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&idx) {
            Some(prev) => prev + c,
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(idx, merged);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, idx: &[usize]) -> Expr {
        self.terms.get(idx).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn same_shape(&self, other: &KForm) {
        assert_eq!(self.dim, other.dim, "forms live on different spaces");
        assert_eq!(self.degree, other.degree, "forms have different degrees");
    }

    pub fn add(&self, other: &KForm) -> KForm {
        self.same_shape(other);
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &KForm) -> KForm {
        self.add(&other.scale(&Expr::num(-1.0)))
    }

    pub fn scale(&self, f: &Expr) -> KForm {
        let mut out = KForm::zero(self.dim, self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx.clone(), f * c);
        }
        out
    }

    pub fn wedge(&self, other: &KForm) -> KForm {
        assert_eq!(self.dim, other.dim, "forms live on different spaces");
        let mut out = KForm::zero(self.dim, self.degree + other.degree);
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                let mut idx: Vec<usize> = i.iter().chain(j).cloned().collect();
                if let Some(sign) = sort_sign(&mut idx) {
                    let c = a * b;
                    out.add_term(idx, if sign < 0.0 { -c } else { c });
                }
            }
        }
        out
    }

    /// `k`-fold wedge power.
    pub fn power(&self, k: usize) -> KForm {
        let mut out = KForm::function(self.dim, Expr::one());
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    pub fn d(&self) -> KForm {
        let mut out = KForm::zero(self.dim, self.degree + 1);
        for (idx, f) in &self.terms {
            for j in 0..self.dim {
                if idx.contains(&j) {
                    continue;
                }
                let df = f.diff(Var::Coord(j));
                if df.is_zero() {
                    continue;
                }
                let mut full = Vec::with_capacity(idx.len() + 1);
                full.push(j);
                full.extend_from_slice(idx);
                let sign = sort_sign(&mut full).expect("distinct indices");
                out.add_term(full, if sign < 0.0 { -df } else { df });
            }
        }
        out
    }

    /// Interior product `i_X a = a(X, ...)`.
    pub fn interior(&self, x: &VectorField) -> KForm {
        assert!(self.degree > 0, "interior product of a function");
        let mut out = KForm::zero(self.dim, self.degree - 1);
        for (idx, f) in &self.terms {
            for (m, &i) in idx.iter().enumerate() {
                let xi = &x.comps[i];
                if xi.is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(m);
                let c = xi * f;
                out.add_term(rest, if m % 2 == 1 { -c } else { c });
            }
        }
        out
    }

    /// Lie derivative from the coordinate formula, independent of Cartan's identity.
    pub fn lie_derivative(&self, x: &VectorField) -> KForm {
        let jac = x.jacobian();
        let mut out = KForm::zero(self.dim, self.degree);
        for (idx, f) in &self.terms {
            out.add_term(idx.clone(), x.apply(f));
            for m in 0..idx.len() {
                let row = &jac[idx[m]];
                for (j, dxj) in row.iter().enumerate() {
                    if dxj.is_zero() {
                        continue;
                    }
                    let mut new_idx = idx.clone();
                    new_idx[m] = j;
                    if let Some(sign) = sort_sign(&mut new_idx) {
                        let c = f * dxj;
                        out.add_term(new_idx, if sign < 0.0 { -c } else { c });
                    }
                }
            }
        }
        out
    }

    /// Twisted differential `d_theta a = da - theta ^ a`.
    pub fn twisted_d(&self, theta: &KForm) -> KForm {
        self.d().sub(&theta.wedge(self))
    }

    /// Twisted Lie derivative `L_X a - theta(X) a`.
    pub fn twisted_lie(&self, theta: &KForm, x: &VectorField) -> KForm {
        let theta_x = theta.interior(x).coefficient(&[]);
        self.lie_derivative(x).sub(&self.scale(&theta_x))
    }

    /// Pairing of a one-form with a vector field, as a function.
    pub fn pair(&self, x: &VectorField) -> Expr {
        assert_eq!(self.degree, 1, "pairing needs a one-form");
        self.interior(x).coefficient(&[])
    }

    /// Coefficients at `p`.
    pub fn values_at(&self, p: &[f64]) -> Result<FormAt> {
        check_point(self.dim, p)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (idx, c) in &self.terms {
            terms.push((idx.clone(), c.eval(p)?));
        }
        Ok(FormAt {
            dim: self.dim,
            degree: self.degree,
            terms,
        })
    }

    /// Value on `degree` vectors at `p`.
    pub fn eval_on(&self, p: &[f64], vectors: &[DVector<f64>]) -> Result<f64> {
        Ok(self.values_at(p)?.eval(vectors))
    }

    /// One-form as a covector at `p`.
    pub fn covector_at(&self, p: &[f64]) -> Result<DVector<f64>> {
        assert_eq!(self.degree, 1, "covector of a non-one-form");
        let mut v = DVector::zeros(self.dim);
        for (idx, c) in &self.terms {
            v[idx[0]] = c.eval(p)?;
        }
        Ok(v)
    }

    /// Two-form as an antisymmetric matrix `W` with `w(u, v) = u^T W v`.
    pub fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        assert_eq!(self.degree, 2, "matrix of a non-two-form");
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (idx, c) in &self.terms {
            let v = c.eval(p)?;
            m[(idx[0], idx[1])] = v;
            m[(idx[1], idx[0])] = -v;
        }
        Ok(m)
    }

    /// Renames coordinates `x_i -> x_{i+offset}` into a space of dimension `dim`.
    pub fn shift(&self, offset: usize, dim: usize) -> KForm {
        let mut out = KForm::zero(dim, self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx.iter().map(|i| i + offset).collect(), c.shift_coords(offset));
        }
        out
    }

    /// Largest coefficient expression size, useful for diagnostics.
    pub fn complexity(&self) -> usize {
        self.terms.values().map(Expr::size).sum()
    }
}

/// A form evaluated at a point.
#[derive(Clone, Debug)]
pub struct FormAt {
    pub dim: usize,
    pub degree: usize,
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl FormAt {
    pub fn eval(&self, vectors: &[DVector<f64>]) -> f64 {
        assert_eq!(vectors.len(), self.degree, "wrong number of vectors");
        if self.degree == 0 {
            return self.terms.first().map_or(0.0, |t| t.1);
        }
        let m = DMatrix::from_columns(vectors);
        self.terms
            .iter()
            .map(|(idx, c)| c * linalg::minor_det(&m, idx))
            .sum()
    }

    /// Largest absolute value on `degree`-subsets of the columns of `basis`.
    pub fn max_on_basis(&self, basis: &DMatrix<f64>) -> f64 {
        let cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
        let mut worst: f64 = 0.0;
        for s in linalg::subsets(cols.len(), self.degree) {
            let vs: Vec<DVector<f64>> = s.iter().map(|&i| cols[i].clone()).collect();
            worst = worst.max(self.eval(&vs).abs());
        }
        worst
    }
}

/// A smooth map `R^src -> R^dst` given by component expressions, possibly
/// depending on the parameter `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffeoMap {
    pub src_dim: usize,
    pub comps: Vec<Expr>,
    pub inverse: Option<Vec<Expr>>,
}

/// What a [`transport`] call moves, and in which direction.
#[derive(Clone, Debug)]
pub enum Transportable {
    Form(KForm),
    Field(VectorField),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Pullback,
    Pushforward,
}

impl DiffeoMap {
    pub fn new(src_dim: usize, comps: Vec<Expr>) -> Self {
        DiffeoMap {
            src_dim,
            comps,
            inverse: None,
        }
    }

    pub fn with_inverse(mut self, inverse: Vec<Expr>) -> Self {
        self.inverse = Some(inverse);
        self
    }

    pub fn identity(dim: usize) -> Self {
        let comps: Vec<Expr> = (0..dim).map(Expr::x).collect();
        DiffeoMap::new(dim, comps.clone()).with_inverse(comps)
    }

    pub fn dst_dim(&self) -> usize {
        self.comps.len()
    }

    pub fn at(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.at_with(p, Params::default())
    }

    pub fn at_with(&self, p: &[f64], params: Params) -> Result<DVector<f64>> {
        check_point(self.src_dim, p)?;
        let mut v = DVector::zeros(self.comps.len());
        for (i, c) in self.comps.iter().enumerate() {
            v[i] = c.eval_with(p, params)?;
        }
        Ok(v)
    }

    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.comps
            .iter()
            .map(|c| (0..self.src_dim).map(|j| c.diff(Var::Coord(j))).collect())
            .collect()
    }

    pub fn jacobian_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.src_dim, p)?;
        eval_matrix(&self.jacobian(), p)
    }

    /// Fixes the parameter `t`.
    pub fn at_t(&self, t: f64) -> DiffeoMap {
        DiffeoMap {
            src_dim: self.src_dim,
            comps: self.comps.iter().map(|c| c.at_t(t)).collect(),
            inverse: self
                .inverse
                .as_ref()
                .map(|inv| inv.iter().map(|c| c.at_t(t)).collect()),
        }
    }

    /// `self o other`.
    pub fn compose(&self, other: &DiffeoMap) -> DiffeoMap {
        let comps = self.comps.iter().map(|c| c.compose(&other.comps)).collect();
        let inverse = match (&self.inverse, &other.inverse) {
            (Some(a), Some(b)) => Some(b.iter().map(|c| c.compose(a)).collect()),
            _ => None,
        };
        DiffeoMap {
            src_dim: other.src_dim,
            comps,
            inverse,
        }
    }

    pub fn inverted(&self) -> Result<DiffeoMap> {
        let inv = self.inverse.clone().ok_or(Error::MissingInverse)?;
        Ok(DiffeoMap {
            src_dim: self.comps.len(),
            comps: inv,
            inverse: Some(self.comps.clone()),
        })
    }

    /// Symbolic pullback of a form on the target.
    pub fn pullback(&self, a: &KForm) -> KForm {
        assert_eq!(a.dim, self.comps.len(), "form does not live on the target");
        let differentials: Vec<KForm> = self
            .comps
            .iter()
            .map(|c| KForm::exact(self.src_dim, c))
            .collect();
        let mut out = KForm::zero(self.src_dim, a.degree);
        for (idx, c) in &a.terms {
            let mut term = KForm::function(self.src_dim, c.compose(&self.comps));
            for &i in idx {
                term = term.wedge(&differentials[i]);
            }
            out = out.add(&term);
        }
        out
    }

    /// Symbolic pushforward of a vector field; needs the inverse.
    pub fn pushforward(&self, x: &VectorField) -> Result<VectorField> {
        let inv = self.inverse.as_ref().ok_or(Error::MissingInverse)?;
        let jac = self.jacobian();
        let comps = jac
            .iter()
            .map(|row| {
                Expr::sum(
                    row.iter()
                        .zip(&x.comps)
                        .map(|(d, xc)| d * xc),
                )
                .compose(inv)
            })
            .collect();
        Ok(VectorField::new(comps))
    }

    /// Pullback of a form evaluated pointwise: `a_{phi(p)}(D phi v_1, ...)`.
    pub fn pullback_at(&self, a: &KForm, p: &[f64], vectors: &[DVector<f64>]) -> Result<f64> {
        let q = self.at(p)?;
        let j = self.jacobian_at(p)?;
        let pushed: Vec<DVector<f64>> = vectors.iter().map(|v| &j * v).collect();
        a.eval_on(q.as_slice(), &pushed)
    }
}

/// Moves a form or a field along `phi`.
pub fn transport(phi: &DiffeoMap, obj: &Transportable, dir: Direction) -> Result<Transportable> {
    match (obj, dir) {
        (Transportable::Form(a), Direction::Pullback) => Ok(Transportable::Form(phi.pullback(a))),
        (Transportable::Form(a), Direction::Pushforward) => {
            Ok(Transportable::Form(phi.inverted()?.pullback(a)))
        }
        (Transportable::Field(x), Direction::Pushforward) => {
            Ok(Transportable::Field(phi.pushforward(x)?))
        }
        (Transportable::Field(x), Direction::Pullback) => {
            Ok(Transportable::Field(phi.inverted()?.pushforward(x)?))
        }
    }
}

/// Lie derivative of a form along `x` at `p`, evaluated on `vectors`, from
/// the RK4 flow of `x` with step `1e-3` and a five-point stencil in time.
pub fn lie_derivative_by_flow(
    x: &VectorField,
    a: &KForm,
    p: &[f64],
    vectors: &[DVector<f64>],
) -> Result<f64> {
    let h = 1e-3;
    let g = |t: f64| -> Result<f64> {
        let steps = (t.abs() / h).round().max(1.0) as usize;
        let (q, jac) = x.flow(p, t, steps)?;
        let pushed: Vec<DVector<f64>> = vectors.iter().map(|v| &jac * v).collect();
        a.eval_on(q.as_slice(), &pushed)
    };
    flow::five_point(g, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn wedge_of_coordinate_forms() {
        let dx = KForm::one_form(vec![e("1"), e("0")]);
        let dy = KForm::one_form(vec![e("0"), e("1")]);
        let w = dx.wedge(&dy);
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 5.0]);
        assert_eq!(w.eval_on(&[0.0, 0.0], &[u, v]).unwrap(), 5.0 - 6.0);
        assert_eq!(dy.wedge(&dx), w.scale(&e("-1")));
    }

    #[test]
    fn interior_convention_fills_first_slot() {
        let w = KForm::from_terms(2, 2, vec![(vec![0, 1], e("1"))]);
        let x = VectorField::coordinate(2, 0);
        // i_{d/dx}(dx ^ dy) = dy
        assert_eq!(w.interior(&x), KForm::one_form(vec![e("0"), e("1")]));
    }

    #[test]
    fn d_of_angular_form_vanishes() {
        let th = KForm::one_form(vec![e("-x2/(x1^2 + x2^2)"), e("x1/(x1^2 + x2^2)")]);
        let dth = th.d();
        let val = dth.values_at(&[0.3, -1.2]).unwrap();
        assert!(val.terms.iter().all(|(_, c)| c.abs() < 1e-14));
    }

    #[test]
    fn lie_derivative_matches_flow() {
        let x = VectorField::parse(3, &["x2", "-x1 + x3", "x1*x2"]).unwrap();
        let a = KForm::from_terms(3, 2, vec![(vec![0, 1], e("x3^2")), (vec![1, 2], e("sin(x1)"))]);
        let p = [0.4, -0.3, 0.8];
        let u = DVector::from_vec(vec![1.0, 0.5, -0.2]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.7]);
        let exact = a.lie_derivative(&x).eval_on(&p, &[u.clone(), v.clone()]).unwrap();
        let oracle = lie_derivative_by_flow(&x, &a, &p, &[u, v]).unwrap();
        assert!((exact - oracle).abs() < 1e-9, "{exact} vs {oracle}");
    }

    #[test]
    fn pullback_by_rotation_preserves_area() {
        let rot = DiffeoMap::new(
            2,
            vec![e("x1*cos(0.7) - x2*sin(0.7)"), e("x1*sin(0.7) + x2*cos(0.7)")],
        );
        let area = KForm::from_terms(2, 2, vec![(vec![0, 1], e("1"))]);
        let pulled = rot.pullback(&area);
        let c = pulled.values_at(&[0.1, 0.2]).unwrap();
        assert!((c.terms[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pushforward_needs_inverse() {
        let m = DiffeoMap::new(1, vec![e("2*x1")]);
        assert!(matches!(
            m.pushforward(&VectorField::coordinate(1, 0)),
            Err(Error::MissingInverse)
        ));
        let m = m.with_inverse(vec![e("x1/2")]);
        let y = m.pushforward(&VectorField::parse(1, &["x1"]).unwrap()).unwrap();
        assert_eq!(y.at(&[3.0]).unwrap()[0], 3.0);
    }
}
