//! JSON system configurations and the builtin registry.
//!
//! A configuration declares a state space, optional first-order dynamics
//! (with an optional affine decomposition), an optional constrained
//! Lagrangian, named regions and adversary families, and the knobs for
//! `analyze`. Unknown keys are rejected everywhere. The builtins live in
//! `systems/*.json` next to this crate and double as format examples.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VectorField;
use crate::expr::{parse_expr, ScalarExpr};
use crate::lagrange::LagrangianSystem;
use crate::obstruction::{AdversaryFamily, ControlSystem, SearchOptions};
use crate::space::{Base, Factor, ModelSpace, Region};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: line {line}, column {column}: {msg}")]
    Json {
        origin: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error("`{0}` is neither a readable config file nor a builtin ({BUILTIN_NAMES:?})")]
    Unknown(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, msg: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindDecl {
    Real,
    Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDecl {
    pub name: String,
    pub kind: KindDecl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDecl {
    pub drift: Vec<String>,
    pub fields: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianDecl {
    pub mass: Vec<Vec<String>>,
    #[serde(default = "zero_string")]
    pub potential: String,
    #[serde(default)]
    pub constraints: Vec<Vec<String>>,
    /// Control names, one per covector.
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub covectors: Vec<Vec<f64>>,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum BaseDecl {
    /// One `[lo, hi]` per factor; `null` for a full Angle circle.
    Box(Vec<Option<[f64; 2]>>),
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDecl {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDecl {
    pub base: BaseDecl,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleDecl>,
    /// Implicit constraints `g ≤ 0`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_char: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryDecl {
    #[serde(default = "eps_name")]
    pub param: String,
    pub template: Vec<String>,
}

fn eps_name() -> String {
    "eps".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrockettDecl {
    pub c_radius: f64,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTestDecl {
    pub field: Vec<String>,
    pub samples: usize,
    #[serde(default = "rank_tol")]
    pub rank_tol: f64,
}

fn rank_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDecl {
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub control_bounds: Vec<[f64; 2]>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    /// Region over which stabilization searches run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_region: Option<String>,
    /// Euler characteristics of named target sets.
    #[serde(default)]
    pub targets: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_adversary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brockett: Option<BrockettDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine_span: Option<FieldTestDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transversality: Option<FieldTestDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coron_radius: Option<f64>,
}

fn default_starts() -> usize {
    64
}

fn default_solver_tol() -> f64 {
    1e-8
}

impl Default for AnalysisDecl {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub space: Vec<FactorDecl>,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianDecl>,
    #[serde(default)]
    pub regions: BTreeMap<String, RegionDecl>,
    #[serde(default)]
    pub adversaries: BTreeMap<String, AdversaryDecl>,
    #[serde(default)]
    pub analysis: AnalysisDecl,
}

pub const BUILTIN_NAMES: [&str; 5] = ["heisenberg", "unicycle", "ex3_field", "ex4_field", "vertical_disk"];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "heisenberg" => include_str!("../systems/heisenberg.json"),
        "unicycle" => include_str!("../systems/unicycle.json"),
        "ex3_field" => include_str!("../systems/ex3_field.json"),
        "ex4_field" => include_str!("../systems/ex4_field.json"),
        "vertical_disk" => include_str!("../systems/vertical_disk.json"),
        _ => return None,
    })
}

impl SystemConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json {
            origin: origin.to_owned(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        builtin_source(name).map(|s| Self::from_json(s, name).expect("builtins are valid"))
    }

    /// A path to a JSON file, or a builtin name.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: name_or_path.to_owned(),
                source,
            })?;
            return Self::from_json(&text, name_or_path);
        }
        Self::builtin(name_or_path).ok_or_else(|| ConfigError::Unknown(name_or_path.to_owned()))
    }

    /// Build and validate every declared object.
    pub fn load(&self) -> Result<LoadedSystem, ConfigError> {
        let space = ModelSpace::new(
            self.space
                .iter()
                .map(|f| match f.kind {
                    KindDecl::Real => Factor::real(&f.name),
                    KindDecl::Angle => Factor::angle(&f.name),
                })
                .collect(),
        )
        .map_err(|e| invalid("space", e))?;
        let controls: Vec<&str> = self.controls.iter().map(String::as_str).collect();

        let control = match &self.dynamics {
            None => {
                if self.affine.is_some() {
                    return Err(invalid("affine", "requires `dynamics`"));
                }
                None
            }
            Some(d) => {
                let exprs = parse_all(d, "dynamics")?;
                let mut sys = ControlSystem::new(&space, &controls, exprs).map_err(|e| invalid("dynamics", e))?;
                if let Some(a) = &self.affine {
                    let drift = field(&space, &a.drift, "affine.drift")?;
                    let fields = a
                        .fields
                        .iter()
                        .enumerate()
                        .map(|(i, g)| field(&space, g, &format!("affine.fields[{i}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    sys = sys.with_affine(drift, fields).map_err(|e| invalid("affine", e))?;
                }
                Some(sys)
            }
        };

        let lagrangian = match &self.lagrangian {
            None => None,
            Some(l) => {
                if l.controls.len() != l.covectors.len() {
                    return Err(invalid("lagrangian.controls", "need one name per covector"));
                }
                let m = l
                    .mass
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_all(r, &format!("lagrangian.mass[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let a = l
                    .constraints
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_all(r, &format!("lagrangian.constraints[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let u = parse_expr(&l.potential).map_err(|e| invalid("lagrangian.potential", e))?;
                Some(
                    LagrangianSystem::new(&space, m, u, a, l.covectors.clone())
                        .map_err(|e| invalid("lagrangian", e))?,
                )
            }
        };
        if control.is_none() && lagrangian.is_none() {
            return Err(invalid("dynamics", "need `dynamics`, `lagrangian`, or both"));
        }

        let mut regions = BTreeMap::new();
        for (name, decl) in &self.regions {
            regions.insert(name.clone(), region(&space, decl).map_err(|msg| invalid(format!("regions.{name}"), msg))?);
        }
        let mut adversaries = BTreeMap::new();
        for (name, decl) in &self.adversaries {
            let t = parse_all(&decl.template, &format!("adversaries.{name}.template"))?;
            let fam = AdversaryFamily::new(&space, t, &decl.param).map_err(|e| invalid(format!("adversaries.{name}"), e))?;
            adversaries.insert(name.clone(), fam);
        }

        let a = &self.analysis;
        if a.eps_list.iter().any(|e| !(*e > 0.0)) || a.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("analysis.eps_list", "must be positive and strictly decreasing"));
        }
        if a.control_bounds.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(invalid("analysis.control_bounds", "each bound needs lo < hi"));
        }
        for (key, name) in [("search_region", &a.search_region)] {
            if let Some(n) = name {
                if !regions.contains_key(n) {
                    return Err(invalid(format!("analysis.{key}"), format!("unknown region `{n}`")));
                }
            }
        }
        if let Some(t) = &a.default_target {
            if !a.targets.contains_key(t) {
                return Err(invalid("analysis.default_target", format!("unknown target `{t}`")));
            }
        }
        if let Some(x) = &a.default_adversary {
            if !adversaries.contains_key(x) {
                return Err(invalid("analysis.default_adversary", format!("unknown adversary `{x}`")));
            }
        }
        let span_field = a
            .affine_span
            .as_ref()
            .map(|s| field(&space, &s.field, "analysis.affine_span.field"))
            .transpose()?;
        let transversality_field = a
            .transversality
            .as_ref()
            .map(|s| field(&space, &s.field, "analysis.transversality.field"))
            .transpose()?;
        Ok(LoadedSystem {
            config: self.clone(),
            space,
            control,
            lagrangian,
            regions,
            adversaries,
            span_field,
            transversality_field,
        })
    }
}

fn parse_all(src: &[String], field: &str) -> Result<Vec<ScalarExpr>, ConfigError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| parse_expr(s).map_err(|e| invalid(format!("{field}[{i}]"), e)))
        .collect()
}

fn field(space: &ModelSpace, src: &[String], name: &str) -> Result<VectorField, ConfigError> {
    VectorField::new(space, parse_all(src, name)?).map_err(|e| invalid(name, e))
}

fn region(space: &ModelSpace, d: &RegionDecl) -> Result<Region, String> {
    let base = match &d.base {
        BaseDecl::Box(iv) => Base::Box {
            intervals: iv.iter().map(|b| b.map(|[lo, hi]| (lo, hi))).collect(),
        },
        BaseDecl::Ball { center, radius } => Base::Ball {
            center: center.clone(),
            radius: *radius,
        },
        BaseDecl::Annulus { center, inner, outer } => Base::Annulus {
            center: *center,
            inner: *inner,
            outer: *outer,
        },
    };
    let mut r = Region::new(space, base).map_err(|e| e.to_string())?;
    for o in &d.obstacles {
        r = r.with_obstacle(o.center.clone(), o.radius).map_err(|e| e.to_string())?;
    }
    for c in &d.constraints {
        let g = parse_expr(c).map_err(|e| format!("constraint `{c}`: {e}"))?;
        r = r.with_constraint(g).map_err(|e| e.to_string())?;
    }
    if let Some(chi) = d.euler_char {
        r = r.with_euler_char(chi);
    }
    Ok(r)
}

/// A configuration with every object built.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub config: SystemConfig,
    pub space: ModelSpace,
    pub control: Option<ControlSystem>,
    pub lagrangian: Option<LagrangianSystem>,
    pub regions: BTreeMap<String, Region>,
    pub adversaries: BTreeMap<String, AdversaryFamily>,
    pub span_field: Option<VectorField>,
    pub transversality_field: Option<VectorField>,
}

impl LoadedSystem {
    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn region(&self, name: &str) -> Result<&Region, ConfigError> {
        let name = name.strip_prefix("builtin:").unwrap_or(name);
        self.regions
            .get(name)
            .ok_or_else(|| invalid("regions", format!("unknown region `{name}`")))
    }

    pub fn adversary(&self, name: &str) -> Result<&AdversaryFamily, ConfigError> {
        self.adversaries
            .get(name)
            .ok_or_else(|| invalid("adversaries", format!("unknown adversary `{name}`")))
    }

    /// Search options from the analysis block; `seed` overrides the
    /// configured one.
    pub fn search_options(&self, seed: Option<u64>) -> SearchOptions {
        let a = &self.config.analysis;
        let mut o = SearchOptions::new(a.control_bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect());
        o.starts = a.starts;
        o.seed = seed.unwrap_or(a.seed);
        o.solver_tol = a.solver_tol;
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::region_euler_char;

    #[test]
    fn builtins_load_and_roundtrip() {
        for name in BUILTIN_NAMES {
            let c = SystemConfig::builtin(name).unwrap();
            assert_eq!(c.name, name);
            let back = SystemConfig::from_json(&c.to_json(), "roundtrip").unwrap();
            assert_eq!(back, c, "{name}");
            c.load().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unicycle_regions_have_expected_chi() {
        let sys = SystemConfig::builtin("unicycle").unwrap().load().unwrap();
        for (name, chi) in [("camera-n1", -1), ("camera-n2", -2), ("camera-n3", -3), ("annulus", 0)] {
            assert_eq!(region_euler_char(sys.region(name).unwrap()).unwrap(), chi, "{name}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = SystemConfig::from_json(r#"{"name": "a", "space": [], "bogus": 1}"#, "t").unwrap_err();
        match err {
            ConfigError::Json { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("bogus"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut c = SystemConfig::builtin("heisenberg").unwrap();
        c.dynamics.as_mut().unwrap()[2] = "y*u - x*".into();
        let msg = c.load().unwrap_err().to_string();
        assert!(msg.starts_with("dynamics[2]"), "{msg}");
        let mut c = SystemConfig::builtin("heisenberg").unwrap();
        c.analysis.eps_list = vec![0.01, 0.1];
        assert!(c.load().unwrap_err().to_string().starts_with("analysis.eps_list"));
    }
}
