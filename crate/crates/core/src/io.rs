//! Document formats: Poisson-structure input files and JSON rendering of
//! symbols and series with sorted, reproducible keys.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::momentum::MomentumSymbol;
use crate::poly::XPoly;
use crate::scalar::{format_rat, parse_rat, Rat, Scalar};
use crate::symbols::{GradedSeries, PoissonStructure};

/// One monomial of a structure entry: exact rational coefficient and the
/// exponent vector of `x^1..x^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonomialDoc {
    pub coef: String,
    pub exp: Vec<u8>,
}

/// One entry `alpha^{ij}` (1-based indices).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryDoc {
    pub i: usize,
    pub j: usize,
    pub poly: Vec<MonomialDoc>,
}

/// Poisson structure document; `linear: true` marks files meant to be read
/// as Lie algebra structure constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoissonDoc {
    pub dim: usize,
    #[serde(default)]
    pub entries: Vec<EntryDoc>,
    #[serde(default)]
    pub linear: bool,
}

impl PoissonDoc {
    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("poisson toml: {e}")))
    }

    pub fn from_json_str(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("poisson json: {e}")))
    }

    /// Parse by file extension, defaulting to TOML.
    pub fn from_path(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    /// Validate into a Poisson structure; Jacobi violations are rejected
    /// unless bypassed.
    pub fn to_structure(&self, check_jacobi: bool) -> Result<PoissonStructure, Error> {
        let mut raw = Vec::new();
        for e in &self.entries {
            if e.i == 0 || e.j == 0 || e.i > self.dim || e.j > self.dim {
                return Err(Error::Parse(format!(
                    "entry indices ({}, {}) out of range for dimension {}",
                    e.i, e.j, self.dim
                )));
            }
            let mut p = XPoly::zero(self.dim);
            for m in &e.poly {
                if m.exp.len() != self.dim {
                    return Err(Error::Parse(format!(
                        "exponent vector {:?} does not match dimension {}",
                        m.exp, self.dim
                    )));
                }
                let c = parse_rat(&m.coef)
                    .ok_or_else(|| Error::Parse(format!("bad rational '{}'", m.coef)))?;
                p.add_term(m.exp.clone(), c);
            }
            raw.push((e.i - 1, e.j - 1, p));
        }
        PoissonStructure::from_full_entries(self.dim, raw, check_jacobi)
    }

    pub fn from_structure(alpha: &PoissonStructure) -> Self {
        let entries = alpha
            .upper_entries()
            .map(|(&(i, j), p)| EntryDoc {
                i: i + 1,
                j: j + 1,
                poly: p
                    .terms()
                    .map(|(e, c)| MonomialDoc {
                        coef: format_rat(c),
                        exp: e.clone(),
                    })
                    .collect(),
            })
            .collect();
        PoissonDoc {
            dim: alpha.dim(),
            entries,
            linear: alpha.is_linear(),
        }
    }
}

/// Render a coefficient for JSON output: exact rationals become strings,
/// floats become numbers.
pub trait JsonCoeff: Scalar {
    fn to_json(&self) -> serde_json::Value;
}

impl JsonCoeff for Rat {
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(format_rat(self))
    }
}

impl JsonCoeff for f64 {
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

/// Symbol as JSON with sorted monomial keys: momentum exponents per block
/// plus the x-polynomial coefficient.
pub fn symbol_to_json<C: JsonCoeff>(sym: &MomentumSymbol<C>) -> serde_json::Value {
    let d = sym.dim();
    let terms: Vec<serde_json::Value> = sym
        .terms()
        .map(|(key, coef)| {
            let blocks: Vec<Vec<u8>> = (0..sym.blocks())
                .map(|b| key[b * d..(b + 1) * d].to_vec())
                .collect();
            let coef_terms: Vec<serde_json::Value> = coef
                .terms()
                .map(|(e, c)| serde_json::json!({"exp": e, "c": c.to_json()}))
                .collect();
            serde_json::json!({"p": blocks, "coef": coef_terms})
        })
        .collect();
    serde_json::json!({
        "dim": sym.dim(),
        "blocks": sym.blocks(),
        "terms": terms,
    })
}

/// Graded series as JSON keyed by order.
pub fn series_to_json<C: JsonCoeff>(s: &GradedSeries<C>) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (n, sym) in s.orders() {
        map.insert(n.to_string(), symbol_to_json(sym));
    }
    serde_json::Value::Object(map)
}

/// Parse a polynomial expression in `x1..xd` with rational coefficients:
/// sums of terms like `3/2 * x1^2 * x3` or `-x2`.
pub fn parse_polynomial(text: &str, dim: usize) -> Result<XPoly<Rat>, Error> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Ok(XPoly::zero(dim));
    }
    // Split into signed terms.
    let mut terms = Vec::new();
    let mut current = String::new();
    for (idx, ch) in cleaned.chars().enumerate() {
        if (ch == '+' || ch == '-') && idx > 0 && !current.is_empty() {
            let prev = current.chars().last().unwrap();
            if prev != '^' && prev != '*' && prev != '/' && prev != '+' && prev != '-' {
                terms.push(std::mem::take(&mut current));
            }
        }
        current.push(ch);
    }
    if !current.is_empty() {
        terms.push(current);
    }
    let mut out = XPoly::zero(dim);
    for term in terms {
        let mut coef = Rat::from_integer(1.into());
        let mut exp = vec![0u8; dim];
        let body = if let Some(rest) = term.strip_prefix('-') {
            coef = -coef;
            rest
        } else {
            term.strip_prefix('+').unwrap_or(&term)
        };
        for factor in body.split('*') {
            if factor.is_empty() {
                continue;
            }
            if let Some(rest) = factor.strip_prefix('x') {
                let (var, pow) = match rest.split_once('^') {
                    Some((v, p)) => (v, p.parse::<u8>().map_err(|_| {
                        Error::Parse(format!("bad exponent in '{factor}'"))
                    })?),
                    None => (rest, 1),
                };
                let v: usize = var
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable '{factor}'")))?;
                if v == 0 || v > dim {
                    return Err(Error::Parse(format!(
                        "variable x{} out of range for dimension {}",
                        v, dim
                    )));
                }
                exp[v - 1] += pow;
            } else {
                let c = parse_rat(factor)
                    .ok_or_else(|| Error::Parse(format!("bad coefficient '{factor}'")))?;
                coef *= c;
            }
        }
        out.add_term(exp, coef);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    #[test]
    fn poisson_document_round_trip() {
        let toml_text = r#"
dim = 3
linear = true

[[entries]]
i = 1
j = 2
poly = [{ coef = "1/2", exp = [0, 0, 1] }]

[[entries]]
i = 1
j = 3
poly = [{ coef = "-1/2", exp = [0, 1, 0] }]

[[entries]]
i = 2
j = 3
poly = [{ coef = "1/2", exp = [1, 0, 0] }]
"#;
        let doc = PoissonDoc::from_toml_str(toml_text).unwrap();
        let alpha = doc.to_structure(true).unwrap();
        assert!(alpha.is_linear());
        let doc2 = PoissonDoc::from_structure(&alpha);
        let alpha2 = doc2.to_structure(true).unwrap();
        assert_eq!(alpha, alpha2);
        // JSON flavor parses to the same structure.
        let json_text = serde_json::to_string(&doc2).unwrap();
        let alpha3 = PoissonDoc::from_json_str(&json_text)
            .unwrap()
            .to_structure(true)
            .unwrap();
        assert_eq!(alpha, alpha3);
    }

    #[test]
    fn antisymmetry_error_reported_from_document() {
        let text = r#"
dim = 2
[[entries]]
i = 1
j = 2
poly = [{ coef = "1", exp = [1, 0] }]
[[entries]]
i = 2
j = 1
poly = [{ coef = "1", exp = [1, 0] }]
"#;
        let doc = PoissonDoc::from_toml_str(text).unwrap();
        assert!(matches!(
            doc.to_structure(true),
            Err(Error::Antisymmetry { .. })
        ));
    }

    #[test]
    fn symbol_json_has_sorted_stable_keys() {
        let mut sym = MomentumSymbol::<Rat>::zero(2, 2);
        sym.add_term(vec![1, 0, 0, 1], XPoly::constant(2, rat(1, 2)));
        sym.add_term(vec![0, 1, 1, 0], XPoly::var(2, 0));
        let a = serde_json::to_string(&symbol_to_json(&sym)).unwrap();
        let b = serde_json::to_string(&symbol_to_json(&sym.clone())).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"1/2\""));
    }

    #[test]
    fn polynomial_expression_grammar() {
        let p = parse_polynomial("3/2*x1^2*x2 - x2 + 1", 2).unwrap();
        let expected = XPoly::monomial(2, &[2, 1], rat(3, 2))
            .add(&XPoly::var(2, 1).neg())
            .add(&XPoly::constant(2, rat_int(1)));
        assert_eq!(p, expected);
        assert!(parse_polynomial("x3", 2).is_err());
        assert!(parse_polynomial("2*y1", 2).is_err());
    }
}
