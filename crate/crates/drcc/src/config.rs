//! Versioned JSON problem configs and their mapping onto `ProblemSpec`.

use crate::family::{ComponentMeasure, DistributionFamily, FamilyKind};
use crate::poly::{Block, Monomial, Polynomial, VariableSpace};
use crate::problem::{MomentBoxAmbiguity, ProblemSpec, StokesCaps, Variant};
use crate::sdp::PolyTermJson;
use crate::sets::SemialgebraicSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: required")]
    MissingField(&'static str),
    #[error("schema: expected version {expected}, got {got}")]
    SchemaVersion { expected: u32, got: u32 },
    #[error("{field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("could not parse config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
    #[error(transparent)]
    Set(#[from] crate::sets::SetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceJson {
    pub n: usize,
    pub p: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSetJson {
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaJson {
    #[serde(rename = "box")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub kind: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyJson {
    Gaussian1d {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
        a_box: Vec<(f64, f64)>,
    },
    GaussianNd {
        p: usize,
        a_box: Vec<(f64, f64)>,
    },
    Exponential {
        p: usize,
        a_box: Vec<(f64, f64)>,
    },
    Poisson {
        a_box: Vec<(f64, f64)>,
    },
    Binomial {
        n: u64,
        a_box: Vec<(f64, f64)>,
    },
    FiniteList {
        components: Vec<ComponentJson>,
    },
    MomentTable {
        noise_dim: usize,
        param_dim: usize,
        a_box: Vec<(f64, f64)>,
        betas: Vec<Vec<u32>>,
        polys: Vec<Vec<PolyTermJson>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityJson {
    pub mean_box: Vec<(f64, f64)>,
    pub delta: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StokesJson {
    #[serde(default)]
    pub beta_max: Option<i64>,
    #[serde(default)]
    pub gamma_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub schema: u32,
    pub space: SpaceJson,
    pub x: BoxSetJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaJson>,
    pub f: Vec<Vec<PolyTermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<AmbiguityJson>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub degree: u32,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stokes: Option<StokesJson>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ConfigJson {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigJson = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                expected: SCHEMA_VERSION,
                got: cfg.schema,
            });
        }
        Ok(cfg)
    }

    pub fn to_problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let space = VariableSpace::new(self.space.n, self.space.p, self.space.t)
            .map_err(ConfigError::Poly)?;
        if self.x.bounds.len() != space.n() {
            return Err(ConfigError::Invalid {
                field: "x.box",
                message: format!("needs {} coordinate ranges", space.n()),
            });
        }
        let epsilon = self.epsilon.ok_or(ConfigError::MissingField("epsilon"))?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ConfigError::Invalid {
                field: "epsilon",
                message: format!("must lie in (0,1), got {epsilon}"),
            });
        }
        let f_list = self
            .f
            .iter()
            .map(|terms| poly_from_terms(space, terms))
            .collect::<Result<Vec<_>, _>>()?;
        if f_list.is_empty() {
            return Err(ConfigError::MissingField("f"));
        }
        let family = self
            .family
            .as_ref()
            .map(|fj| family_from_json(space, fj))
            .transpose()?;
        let ambiguity = self.ambiguity.as_ref().map(|a| MomentBoxAmbiguity {
            mean_box: a.mean_box.clone(),
            delta: a.delta,
        });
        let spec = ProblemSpec {
            space,
            x_box: self.x.bounds.clone(),
            omega_box: self.omega.as_ref().and_then(|o| o.bounds.clone()),
            f_list,
            family,
            ambiguity,
            epsilon,
            degree: self.degree,
            variant: self.variant,
            stokes: StokesCaps {
                beta_max: self.stokes.as_ref().and_then(|s| s.beta_max),
                gamma_max: self.stokes.as_ref().and_then(|s| s.gamma_max),
            },
            seed: self.seed.unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn poly_from_terms(
    space: VariableSpace,
    terms: &[PolyTermJson],
) -> Result<Polynomial, ConfigError> {
    let mut p = Polynomial::zero(space);
    for t in terms {
        if t.exps.len() != space.dim() {
            return Err(ConfigError::Invalid {
                field: "f",
                message: format!(
                    "term exponent length {} does not match n+p+t = {}",
                    t.exps.len(),
                    space.dim()
                ),
            });
        }
        p.add_term(
            Monomial::from_exps(t.exps.iter().map(|&e| e as u8).collect()),
            t.coef,
        );
    }
    Ok(p)
}

fn box_param_set(
    space: VariableSpace,
    bounds: &[(f64, f64)],
    field: &'static str,
) -> Result<SemialgebraicSet, ConfigError> {
    if bounds.len() != space.t() {
        return Err(ConfigError::Invalid {
            field,
            message: format!("needs {} coordinate ranges", space.t()),
        });
    }
    Ok(SemialgebraicSet::from_box(space, Block::Param, bounds)?)
}

fn family_from_json(
    space: VariableSpace,
    fj: &FamilyJson,
) -> Result<DistributionFamily, ConfigError> {
    match fj {
        FamilyJson::Gaussian1d { mean, a_box } => {
            let sigma_coord = if mean.is_some() { 0 } else { 1 };
            if a_box.len() <= sigma_coord {
                return Err(ConfigError::Invalid {
                    field: "family.a_box",
                    message: "missing deviation range".into(),
                });
            }
            if a_box[sigma_coord].0 <= 0.0 {
                return Err(ConfigError::Invalid {
                    field: "family.a_box",
                    message: "deviation lower bound must be strictly positive".into(),
                });
            }
            Ok(DistributionFamily {
                kind: FamilyKind::GaussianUnivariate { fixed_mean: *mean },
                param_set: box_param_set(space, a_box, "family.a_box")?,
            })
        }
        FamilyJson::GaussianNd { p, a_box } => Ok(DistributionFamily {
            kind: FamilyKind::GaussianMultivariate { p: *p },
            param_set: box_param_set(space, a_box, "family.a_box")?,
        }),
        FamilyJson::Exponential { p, a_box } => {
            if a_box.iter().any(|&(lo, _)| lo <= 0.0) {
                return Err(ConfigError::Invalid {
                    field: "family.a_box",
                    message: "exponential means must be strictly positive".into(),
                });
            }
            Ok(DistributionFamily {
                kind: FamilyKind::Exponential { p: *p },
                param_set: box_param_set(space, a_box, "family.a_box")?,
            })
        }
        FamilyJson::Poisson { a_box } => Ok(DistributionFamily {
            kind: FamilyKind::Poisson,
            param_set: box_param_set(space, a_box, "family.a_box")?,
        }),
        FamilyJson::Binomial { n, a_box } => Ok(DistributionFamily {
            kind: FamilyKind::Binomial { n: *n },
            param_set: box_param_set(space, a_box, "family.a_box")?,
        }),
        FamilyJson::FiniteList { components } => {
            let comps = components
                .iter()
                .map(|c| component_from_json(c))
                .collect::<Result<Vec<_>, _>>()?;
            let kappa = comps.len();
            if kappa == 0 {
                return Err(ConfigError::MissingField("family.components"));
            }
            // A = {1, …, κ}: box sides plus the support equality ∏(a − i) = 0
            let bounds = [(1.0, kappa.max(2) as f64)];
            let base = box_param_set(space, &bounds, "family.components")?;
            let a = Polynomial::var(space, Block::Param, 0)?;
            let mut prod = Polynomial::constant(space, 1.0);
            for i in 1..=kappa {
                prod = prod.mul(&a.sub(&Polynomial::constant(space, i as f64))?)?;
            }
            let param_set = SemialgebraicSet::new(
                space,
                Block::Param,
                base.inequalities().to_vec(),
                vec![prod],
            )?;
            Ok(DistributionFamily {
                kind: FamilyKind::FiniteList { components: comps },
                param_set,
            })
        }
        FamilyJson::MomentTable {
            noise_dim,
            param_dim,
            a_box,
            betas,
            polys,
        } => {
            if betas.len() != polys.len() {
                return Err(ConfigError::Invalid {
                    field: "family.betas",
                    message: "betas and polys must have equal length".into(),
                });
            }
            let entries = betas
                .iter()
                .zip(polys)
                .map(|(b, terms)| {
                    let t: Vec<(Vec<u8>, f64)> = terms
                        .iter()
                        .map(|tj| {
                            (
                                tj.exps.iter().map(|&e| e as u8).collect::<Vec<u8>>(),
                                tj.coef,
                            )
                        })
                        .collect();
                    (b.clone(), t)
                })
                .collect();
            Ok(DistributionFamily {
                kind: FamilyKind::MomentTable {
                    noise_dim: *noise_dim,
                    param_dim: *param_dim,
                    entries,
                },
                param_set: box_param_set(space, a_box, "family.a_box")?,
            })
        }
    }
}

fn component_from_json(c: &ComponentJson) -> Result<ComponentMeasure, ConfigError> {
    let need = |k: usize| -> Result<(), ConfigError> {
        if c.params.len() != k {
            return Err(ConfigError::Invalid {
                field: "family.components",
                message: format!("component '{}' needs {} parameters", c.kind, k),
            });
        }
        Ok(())
    };
    match c.kind.as_str() {
        "gaussian" => {
            need(2)?;
            Ok(ComponentMeasure::Gaussian {
                mean: c.params[0],
                sd: c.params[1],
            })
        }
        "exponential" => {
            need(1)?;
            Ok(ComponentMeasure::Exponential { mean: c.params[0] })
        }
        "poisson" => {
            need(1)?;
            Ok(ComponentMeasure::Poisson { rate: c.params[0] })
        }
        "binomial" => {
            need(2)?;
            Ok(ComponentMeasure::Binomial {
                n: c.params[0] as u64,
                prob: c.params[1],
            })
        }
        other => Err(ConfigError::Invalid {
            field: "family.components",
            message: format!("unknown component kind '{other}'"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = r#"{
      "schema": 1,
      "space": {"n": 1, "p": 1, "t": 2},
      "x": {"box": [[-1.0, 1.0]]},
      "f": [[{"exps": [1,0,0,0], "coef": 1.0}, {"exps": [0,1,0,0], "coef": -1.0}]],
      "family": {"kind": "gaussian1d", "a_box": [[-0.1, 0.1], [0.8, 1.0]]},
      "epsilon": 0.3,
      "degree": 8,
      "variant": "stokes",
      "seed": 7
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = ConfigJson::parse(EX1).unwrap();
        let spec = cfg.to_problem_spec().unwrap();
        assert_eq!(spec.space.t(), 2);
        assert_eq!(spec.degree, 8);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let cfg2 = ConfigJson::parse(&text).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn missing_epsilon_names_the_field() {
        let trimmed = EX1.replace("\"epsilon\": 0.3,", "");
        let cfg = ConfigJson::parse(&trimmed).unwrap();
        let err = cfg.to_problem_spec().unwrap_err();
        assert_eq!(err.to_string(), "epsilon: required");
    }

    #[test]
    fn epsilon_out_of_range() {
        let bad = EX1.replace("0.3", "1.5");
        let cfg = ConfigJson::parse(&bad).unwrap();
        let err = cfg.to_problem_spec().unwrap_err();
        assert!(err.to_string().starts_with("epsilon:"), "{err}");
    }

    #[test]
    fn sigma_lower_bound_enforced() {
        let bad = EX1.replace("[0.8, 1.0]", "[0.0, 1.0]");
        let cfg = ConfigJson::parse(&bad).unwrap();
        assert!(cfg.to_problem_spec().is_err());
    }
}
