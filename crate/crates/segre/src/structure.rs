//! The coframe aggregate: loading, validation, and the split-signature
//! metric singled out by the cone field for p = q = 2.
//!
//! Fixture format (line oriented, `#` starts a comment):
//!
//! ```text
//! [structure]
//! p = 2
//! q = 2
//! coordinates = x, y, u, v
//! functions = f(u)
//! [coframe]
//! w_1_3 = "dx + f(u)*dy"
//! ...
//! [domain]
//! nonzero = u - x
//! [expect]          # optional regression metadata, free keys
//! class = beta
//! ```

use crate::context::Context;
use crate::error::StructureError;
use crate::expr::ScalarExpr;
use crate::form::DiffForm;
use crate::oracle::{det_f64, Instantiation};
use crate::parse::{parse_one_form, parse_scalar};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct AGStructure {
    pub p: usize,
    pub q: usize,
    pub ctx: Context,
    /// Row-major by Latin index then Greek: `omega[i - p - 1][alpha - 1]`.
    pub omega: Vec<Vec<DiffForm>>,
    /// Expressions asserted nonzero on the domain.
    pub constraints: Vec<ScalarExpr>,
    /// Raw `[expect]` metadata, preserved in declaration order.
    pub expect: Vec<(String, String)>,
}

impl AGStructure {
    pub fn dim(&self) -> usize {
        self.p * self.q
    }

    /// Basis form by paper indices: alpha in 1..=p, i in p+1..=p+q.
    pub fn w(&self, alpha: usize, i: usize) -> &DiffForm {
        &self.omega[i - self.p - 1][alpha - 1]
    }

    /// Flat index of the basis pair (alpha, i): Latin-major, Greek-minor.
    pub fn basis_index(&self, alpha: usize, i: usize) -> usize {
        (i - self.p - 1) * self.p + (alpha - 1)
    }

    /// Inverse of `basis_index`.
    pub fn basis_pair(&self, idx: usize) -> (usize, usize) {
        (idx % self.p + 1, idx / self.p + self.p + 1)
    }

    pub fn basis_label(&self, idx: usize) -> String {
        let (alpha, i) = self.basis_pair(idx);
        format!("w_{alpha}^{i}")
    }

    /// Coefficient matrix of the coframe over coordinate differentials:
    /// `m[basis_index][coord]`.
    pub fn coefficient_matrix(&self) -> Vec<Vec<ScalarExpr>> {
        let n = self.dim();
        let mut m = vec![vec![ScalarExpr::zero(); n]; n];
        for (idx, row) in m.iter_mut().enumerate() {
            let (alpha, i) = self.basis_pair(idx);
            for (mi, c) in &self.w(alpha, i).terms {
                row[mi[0]] = c.clone();
            }
        }
        m
    }

    /// Numeric coframe matrix at an instantiation.
    pub fn coefficient_matrix_f64(
        &self,
        inst: &Instantiation,
    ) -> Result<Vec<Vec<f64>>, StructureError> {
        self.coefficient_matrix()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| inst.eval_f64(c).map_err(|_| StructureError::DomainViolation))
                    .collect()
            })
            .collect()
    }

    /// Check linear independence of the coframe at `n_points` sample points.
    pub fn validate_coframe(&self, seed: u64, n_points: usize) -> Result<(), StructureError> {
        for k in 0..n_points {
            let inst = Instantiation::generate(&self.ctx, &self.constraints, seed + k as u64)
                .map_err(|_| StructureError::DomainViolation)?;
            let mut m = self.coefficient_matrix_f64(&inst)?;
            // scale rows to unit max entry so the threshold is meaningful
            for row in m.iter_mut() {
                let mx = row.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                if mx == 0.0 {
                    return Err(StructureError::SingularCoframe(format!(
                        "a basis form vanishes at sample {k}"
                    )));
                }
                for x in row.iter_mut() {
                    *x /= mx;
                }
            }
            let d = det_f64(m);
            if d.abs() <= 1e-9 {
                return Err(StructureError::SingularCoframe(format!(
                    "|det| = {:.3e} at sample {k}",
                    d.abs()
                )));
            }
        }
        Ok(())
    }

    /// The quadratic metric `w_1^3 w_2^4 - w_1^4 w_2^3` (p = q = 2 only).
    pub fn segre_metric(&self) -> Result<QuadraticMetric, StructureError> {
        if self.p != 2 || self.q != 2 {
            return Err(StructureError::WrongSignature {
                p: self.p,
                q: self.q,
            });
        }
        let mut g = QuadraticMetric::zero();
        g.add_symmetric_product(self.w(1, 3), self.w(2, 4));
        g.sub_symmetric_product(self.w(1, 4), self.w(2, 3));
        Ok(g)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("[structure]\n");
        out.push_str(&format!("p = {}\n", self.p));
        out.push_str(&format!("q = {}\n", self.q));
        let coords: Vec<&str> = self.ctx.coords.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&format!("coordinates = {}\n", coords.join(", ")));
        if !self.ctx.funcs.is_empty() {
            let funcs: Vec<String> = self
                .ctx
                .funcs
                .iter()
                .map(|f| format!("{}({})", f.name, self.ctx.coord_name(f.arg)))
                .collect();
            out.push_str(&format!("functions = {}\n", funcs.join(", ")));
        }
        out.push_str("[coframe]\n");
        for i in self.p + 1..=self.p + self.q {
            for alpha in 1..=self.p {
                out.push_str(&format!(
                    "w_{alpha}_{i} = \"{}\"\n",
                    self.w(alpha, i).display(&self.ctx)
                ));
            }
        }
        if !self.constraints.is_empty() {
            out.push_str("[domain]\n");
            let cs: Vec<String> = self
                .constraints
                .iter()
                .map(|c| c.display(&self.ctx))
                .collect();
            out.push_str(&format!("nonzero = {}\n", cs.join(", ")));
        }
        if !self.expect.is_empty() {
            out.push_str("[expect]\n");
            for (k, v) in &self.expect {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Symmetric quadratic form over coordinate differentials. The coefficient
/// map is keyed by ordered pairs (i <= j) and stores the full cross-term
/// coefficient, matching the usual `dx dv + f(u) dy dv` notation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticMetric {
    pub coeffs: BTreeMap<(usize, usize), ScalarExpr>,
}

impl QuadraticMetric {
    pub fn zero() -> Self {
        QuadraticMetric {
            coeffs: BTreeMap::new(),
        }
    }

    fn add_pair(&mut self, i: usize, j: usize, c: ScalarExpr) {
        if c.is_zero() {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let e = self.coeffs.entry(key).or_insert_with(ScalarExpr::zero);
        *e = e.add(&c);
        if e.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    /// `self += a ⊙ b` with the full-cross-term convention.
    pub fn add_symmetric_product(&mut self, a: &DiffForm, b: &DiffForm) {
        for (ia, ca) in &a.terms {
            for (ib, cb) in &b.terms {
                self.add_pair(ia[0], ib[0], ca.mul(cb));
            }
        }
    }

    pub fn sub_symmetric_product(&mut self, a: &DiffForm, b: &DiffForm) {
        self.add_symmetric_product(&a.neg(), b);
    }

    /// Value of g(z, z) for a numeric tangent vector in coordinates.
    pub fn eval_on_vector(&self, inst: &Instantiation, z: &[f64]) -> Result<f64, StructureError> {
        let mut acc = 0.0;
        for ((i, j), c) in &self.coeffs {
            let cv = inst
                .eval_f64(c)
                .map_err(|_| StructureError::DomainViolation)?;
            acc += cv * z[*i] * z[*j];
        }
        Ok(acc)
    }

    pub fn render(&self, ctx: &Context, pretty: bool) -> String {
        if self.coeffs.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for ((i, j), c) in &self.coeffs {
            let base = if i == j {
                format!("d{}^2", ctx.coord_name(*i))
            } else {
                format!("d{} d{}", ctx.coord_name(*i), ctx.coord_name(*j))
            };
            let cs = c.render(ctx, pretty);
            parts.push(if cs == "1" {
                base
            } else if cs == "-1" {
                format!("-{base}")
            } else if c.num().terms.len() > 1 || !c.den().is_one() {
                format!("({cs}) {base}")
            } else {
                format!("{cs} {base}")
            });
        }
        let mut out = String::new();
        for (k, p) in parts.iter().enumerate() {
            if k == 0 {
                out.push_str(p);
            } else if let Some(stripped) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(stripped);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        out
    }
}

/// Generic section/key-value file representation shared by fixtures and
/// solution-family files.
pub struct KvFile {
    /// (section, key, value, line number)
    pub entries: Vec<(String, String, String, usize)>,
}

pub fn parse_kv(text: &str) -> Result<KvFile, StructureError> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(StructureError::Parse {
                line: lineno + 1,
                msg: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(StructureError::Parse {
                line: lineno + 1,
                msg: "expected `key = value`".into(),
            });
        };
        let key = line[..eq].trim().to_string();
        let mut value = line[eq + 1..].trim().to_string();
        if value.starts_with('"') && value.ends_with('"') && value.len() >= 2 {
            value = value[1..value.len() - 1].to_string();
        }
        if section.is_empty() {
            return Err(StructureError::Parse {
                line: lineno + 1,
                msg: "key outside of any [section]".into(),
            });
        }
        entries.push((section.clone(), key, value, lineno + 1));
    }
    Ok(KvFile { entries })
}

impl KvFile {
    pub fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(s, k, _, _)| s == section && k == key)
            .map(|(_, _, v, l)| (v.as_str(), *l))
    }

    pub fn all(&self, section: &str) -> impl Iterator<Item = (&str, &str, usize)> {
        self.entries
            .iter()
            .filter(move |(s, _, _, _)| s == section)
            .map(|(_, k, v, l)| (k.as_str(), v.as_str(), *l))
    }
}

fn comma_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Load and validate a structure from fixture text.
pub fn load_structure(text: &str) -> Result<AGStructure, StructureError> {
    let kv = parse_kv(text)?;
    let perr = |line: usize, msg: String| StructureError::Parse { line, msg };

    let (pv, pl) = kv
        .get("structure", "p")
        .ok_or_else(|| perr(1, "missing [structure] p".into()))?;
    let p: usize = pv.parse().map_err(|_| perr(pl, "bad p".into()))?;
    let (qv, ql) = kv
        .get("structure", "q")
        .ok_or_else(|| perr(1, "missing [structure] q".into()))?;
    let q: usize = qv.parse().map_err(|_| perr(ql, "bad q".into()))?;
    if p < 2 || q < 2 {
        return Err(perr(pl, "p and q must both be at least 2".into()));
    }

    let mut ctx = Context::new();
    let (cv, cl) = kv
        .get("structure", "coordinates")
        .ok_or_else(|| perr(1, "missing coordinates".into()))?;
    for name in comma_list(cv) {
        ctx.add_coord(&name).map_err(|e| perr(cl, e.to_string()))?;
    }
    if ctx.dim() != p * q {
        return Err(StructureError::DimensionMismatch {
            pq: p * q,
            n: ctx.dim(),
        });
    }
    if let Some((fv, fl)) = kv.get("structure", "functions") {
        for decl in comma_list(fv) {
            let open = decl
                .find('(')
                .ok_or_else(|| perr(fl, format!("bad function declaration `{decl}`")))?;
            let close = decl
                .strip_suffix(')')
                .ok_or_else(|| perr(fl, format!("bad function declaration `{decl}`")))?;
            let name = decl[..open].trim();
            let arg = close[open + 1..].trim();
            ctx.add_func(name, arg).map_err(|e| perr(fl, e.to_string()))?;
        }
    }

    let mut omega = vec![vec![DiffForm::zero(1); p]; q];
    let mut seen = vec![vec![false; p]; q];
    for (key, value, line) in kv.all("coframe") {
        let parts: Vec<&str> = key.split('_').collect();
        if parts.len() != 3 || parts[0] != "w" {
            return Err(perr(line, format!("bad coframe key `{key}`")));
        }
        let alpha: usize = parts[1]
            .parse()
            .map_err(|_| perr(line, "bad alpha index".into()))?;
        let i: usize = parts[2]
            .parse()
            .map_err(|_| perr(line, "bad i index".into()))?;
        if !(1..=p).contains(&alpha) || !(p + 1..=p + q).contains(&i) {
            return Err(perr(
                line,
                format!(
                    "index out of range in `{key}` (alpha in 1..={p}, i in {}..={})",
                    p + 1,
                    p + q
                ),
            ));
        }
        let form = parse_one_form(value, &ctx).map_err(|e| perr(line, e.to_string()))?;
        omega[i - p - 1][alpha - 1] = form;
        seen[i - p - 1][alpha - 1] = true;
    }
    for i in 0..q {
        for a in 0..p {
            if !seen[i][a] {
                return Err(perr(
                    1,
                    format!("missing coframe entry w_{}_{}", a + 1, i + p + 1),
                ));
            }
        }
    }

    let mut constraints = Vec::new();
    if let Some((dv, dl)) = kv.get("domain", "nonzero") {
        for c in comma_list(dv) {
            constraints.push(parse_scalar(&c, &ctx).map_err(|e| perr(dl, e.to_string()))?);
        }
    }

    let expect = kv
        .all("expect")
        .map(|(k, v, _)| (k.to_string(), v.to_string()))
        .collect();

    let s = AGStructure {
        p,
        q,
        ctx,
        omega,
        constraints,
        expect,
    };
    s.validate_coframe(crate::oracle::DEFAULT_SEED, 8)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT22: &str = "\
[structure]
p = 2
q = 2
coordinates = x, y, u, v
[coframe]
w_1_3 = \"dx\"
w_2_3 = \"dy\"
w_1_4 = \"du\"
w_2_4 = \"dv\"
";

    const EX3_5: &str = "\
[structure]
p = 2
q = 2
coordinates = x, y, u, v
functions = f(u)
[coframe]
w_1_3 = \"dx + f(u)*dy\"
w_2_3 = \"dy\"
w_1_4 = \"du\"
w_2_4 = \"dv\"
";

    #[test]
    fn loads_flat_fixture() {
        let s = load_structure(FLAT22).unwrap();
        assert_eq!((s.p, s.q), (2, 2));
        assert_eq!(s.w(1, 3), &DiffForm::d_coord(0));
    }

    #[test]
    fn loads_formal_function_fixture() {
        let s = load_structure(EX3_5).unwrap();
        let f = ScalarExpr::deriv(0, 2, 0);
        assert_eq!(s.w(1, 3).coefficient(&[1]), f);
    }

    #[test]
    fn singular_coframe_rejected() {
        let bad = EX3_5.replace("w_2_3 = \"dy\"", "w_2_3 = \"dx + f(u)*dy\"");
        assert!(matches!(
            load_structure(&bad),
            Err(StructureError::SingularCoframe(_))
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bad = FLAT22.replace("coordinates = x, y, u, v", "coordinates = x, y, u");
        assert!(matches!(
            load_structure(&bad),
            Err(StructureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn metric_of_ex3_5() {
        let s = load_structure(EX3_5).unwrap();
        let g = s.segre_metric().unwrap();
        // dx dv + f(u) dy dv - dy du
        assert_eq!(g.coeffs.len(), 3);
        assert_eq!(g.coeffs[&(0, 3)], ScalarExpr::one());
        assert_eq!(g.coeffs[&(1, 3)], ScalarExpr::deriv(0, 2, 0));
        assert_eq!(g.coeffs[&(1, 2)], ScalarExpr::from_int(-1));
        assert_eq!(g.render(&s.ctx, false), "dx dv - dy du + f(u) dy dv");
    }

    #[test]
    fn serialize_roundtrip() {
        let s = load_structure(EX3_5).unwrap();
        let s2 = load_structure(&s.serialize()).unwrap();
        assert_eq!(s.omega, s2.omega);
        assert_eq!(s.ctx, s2.ctx);
    }
}
