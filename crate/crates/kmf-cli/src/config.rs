//! Configuration: one canonical TOML key set with hard errors on unknown
//! keys, overridable by command-line flags (flags win over the file, the
//! file wins over defaults). The fully resolved configuration is echoed to
//! `resolved_config.toml` in the output directory and parses back to the
//! same resolved state.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kmf_core::experiments::{InitialLaw, Observable};
use kmf_core::model::{make_field, Coefficients, FieldKind, ForceField};
use kmf_core::rates::{self, Variant};

/// Fixed default seed used when neither the file nor the flags provide one.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub field: FieldSection,
    pub sim: SimSection,
    pub init: InitSection,
    /// Second initial law (equilibrium experiment).
    pub init_b: Option<InitSection>,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub kind: Option<String>,
    pub alpha: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub dim: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub stride: Option<u64>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub kind: Option<String>,
    pub x: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub std_x: Option<f64>,
    pub std_v: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Must match the subcommand when present.
    pub name: Option<String>,
    pub offset_x: Option<Vec<f64>>,
    pub offset_v: Option<Vec<f64>>,
    pub w2_sample: Option<usize>,
    pub ladder: Option<Vec<usize>>,
    pub mckean: Option<String>,
    pub proxy_m: Option<usize>,
    pub uniformity_n: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub observable: Option<String>,
    pub radii_sigmas: Option<Vec<f64>>,
    pub reference_n: Option<usize>,
    pub reference_t: Option<f64>,
    pub snapshot: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub timestamp: Option<bool>,
}

/// Flag-level overrides collected by the CLI; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub kind: Option<String>,
    pub alpha: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub stride: Option<u64>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
    pub no_timestamp: bool,
    pub experiment: ExperimentSection,
    pub init_x: Option<Vec<f64>>,
    pub init_v: Option<Vec<f64>>,
    pub init_kind: Option<String>,
    pub init_b_x: Option<Vec<f64>>,
    pub init_b_v: Option<Vec<f64>>,
    pub init_b_kind: Option<String>,
}

/// Fully materialized configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment_name: String,
    pub field_kind: String,
    pub coeffs: Coefficients,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub stride: u64,
    pub seed: u64,
    pub replicas: usize,
    pub init: InitialLaw,
    pub init_b: InitialLaw,
    pub offset_x: Vec<f64>,
    pub offset_v: Vec<f64>,
    pub w2_sample: usize,
    pub ladder: Vec<usize>,
    pub mckean: String,
    pub proxy_m: usize,
    pub uniformity_n: Option<usize>,
    pub ns: Vec<usize>,
    pub observable: String,
    pub radii_sigmas: Vec<f64>,
    pub reference_n: usize,
    pub reference_t: f64,
    pub snapshot: bool,
    pub out_dir: PathBuf,
    pub timestamp: bool,
}

fn parse_init(section: &InitSection, dim: usize, what: &str) -> Result<InitialLaw> {
    let kind = section.kind.as_deref().unwrap_or("dirac");
    let x = section.x.clone().unwrap_or_else(|| vec![0.0; dim]);
    let v = section.v.clone().unwrap_or_else(|| vec![0.0; dim]);
    if x.len() != dim || v.len() != dim {
        bail!("{what}: x/v must have length dim = {dim}");
    }
    match kind {
        "dirac" => Ok(InitialLaw::Dirac { x, v }),
        "gaussian" => Ok(InitialLaw::Gaussian {
            mean_x: x,
            mean_v: v,
            std_x: section.std_x.unwrap_or(1.0),
            std_v: section.std_v.unwrap_or(1.0),
        }),
        other => bail!("{what}: unknown initial law kind '{other}' (dirac | gaussian)"),
    }
}

impl RunConfig {
    /// Builds the force field declared by the configuration.
    pub fn field(&self) -> Result<ForceField> {
        let kind = match self.field_kind.as_str() {
            "linear" => FieldKind::Linear,
            "sinusoidal" => FieldKind::Sinusoidal,
            other => bail!("unknown field kind '{other}' (linear | sinusoidal)"),
        };
        Ok(make_field(kind, self.coeffs)?)
    }

    pub fn observable(&self) -> Result<Observable> {
        match self.observable.as_str() {
            "x0" => Ok(Observable::PositionCoord(0)),
            "smooth_norm" => Ok(Observable::SmoothNorm),
            other => bail!("unknown observable '{other}' (x0 | smooth_norm)"),
        }
    }

    /// Round-trippable file form of the resolved configuration.
    pub fn to_file_config(&self) -> FileConfig {
        let init_section = |law: &InitialLaw| match law {
            InitialLaw::Dirac { x, v } => InitSection {
                kind: Some("dirac".into()),
                x: Some(x.clone()),
                v: Some(v.clone()),
                std_x: None,
                std_v: None,
            },
            InitialLaw::Gaussian {
                mean_x,
                mean_v,
                std_x,
                std_v,
            } => InitSection {
                kind: Some("gaussian".into()),
                x: Some(mean_x.clone()),
                v: Some(mean_v.clone()),
                std_x: Some(*std_x),
                std_v: Some(*std_v),
            },
        };
        FileConfig {
            field: FieldSection {
                kind: Some(self.field_kind.clone()),
                alpha: Some(self.coeffs.alpha),
                alpha_prime: Some(self.coeffs.alpha_prime),
                beta: Some(self.coeffs.beta),
                gamma: Some(self.coeffs.gamma),
                delta: Some(self.coeffs.delta),
                dim: Some(self.coeffs.dim),
            },
            sim: SimSection {
                n: Some(self.n),
                dt: Some(self.dt),
                t_final: Some(self.t_final),
                stride: Some(self.stride),
                seed: Some(self.seed),
                replicas: Some(self.replicas),
            },
            init: init_section(&self.init),
            init_b: Some(init_section(&self.init_b)),
            experiment: ExperimentSection {
                name: Some(self.experiment_name.clone()),
                offset_x: Some(self.offset_x.clone()),
                offset_v: Some(self.offset_v.clone()),
                w2_sample: Some(self.w2_sample),
                ladder: Some(self.ladder.clone()),
                mckean: Some(self.mckean.clone()),
                proxy_m: Some(self.proxy_m),
                uniformity_n: self.uniformity_n,
                ns: Some(self.ns.clone()),
                observable: Some(self.observable.clone()),
                radii_sigmas: Some(self.radii_sigmas.clone()),
                reference_n: Some(self.reference_n),
                reference_t: Some(self.reference_t),
                snapshot: Some(self.snapshot),
            },
            output: OutputSection {
                dir: Some(self.out_dir.clone()),
                timestamp: Some(self.timestamp),
            },
        }
    }
}

/// Which admissibility precheck a subcommand needs.
fn required_variant(experiment: &str) -> Option<Variant> {
    match experiment {
        "contraction" | "equilibrium" => Some(Variant::Contraction),
        "chaos" | "deviation" | "moments" => Some(Variant::DoubledAlpha),
        _ => None,
    }
}

/// Loads the optional file, applies flag overrides and materializes every
/// default. Unknown keys, type mismatches and inadmissible coefficient
/// combinations are hard errors.
pub fn parse_config(
    experiment: &str,
    config_path: Option<&Path>,
    over: &Overrides,
) -> Result<RunConfig> {
    let file: FileConfig = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    if let Some(name) = &file.experiment.name {
        if name != experiment {
            bail!("config names experiment '{name}' but the subcommand is '{experiment}'");
        }
    }

    let field_kind = over
        .kind
        .clone()
        .or_else(|| file.field.kind.clone())
        .unwrap_or_else(|| "linear".into());
    let dim = over.dim.or(file.field.dim).unwrap_or(1);
    let coeffs = Coefficients::new(
        over.alpha.or(file.field.alpha).unwrap_or(1.0),
        over.alpha_prime.or(file.field.alpha_prime).unwrap_or(1.0),
        over.beta.or(file.field.beta).unwrap_or(1.0),
        over.gamma.or(file.field.gamma).unwrap_or(0.0),
        over.delta.or(file.field.delta).unwrap_or(0.0),
        dim,
    )?;

    let mut init_section = file.init.clone();
    if let Some(k) = &over.init_kind {
        init_section.kind = Some(k.clone());
    }
    if let Some(x) = &over.init_x {
        init_section.x = Some(x.clone());
    }
    if let Some(v) = &over.init_v {
        init_section.v = Some(v.clone());
    }
    let init = parse_init(&init_section, dim, "init")?;

    let mut init_b_section = file.init_b.clone().unwrap_or_else(|| InitSection {
        kind: Some("dirac".into()),
        x: Some(vec![5.0; dim]),
        v: Some(vec![0.0; dim]),
        std_x: None,
        std_v: None,
    });
    if let Some(k) = &over.init_b_kind {
        init_b_section.kind = Some(k.clone());
    }
    if let Some(x) = &over.init_b_x {
        init_b_section.x = Some(x.clone());
    }
    if let Some(v) = &over.init_b_v {
        init_b_section.v = Some(v.clone());
    }
    let init_b = parse_init(&init_b_section, dim, "init_b")?;

    let exp_file = &file.experiment;
    let exp_over = &over.experiment;
    let cfg = RunConfig {
        experiment_name: experiment.to_string(),
        field_kind,
        coeffs,
        n: over.n.or(file.sim.n).unwrap_or(1024),
        dt: over.dt.or(file.sim.dt).unwrap_or(1e-3),
        t_final: over.t_final.or(file.sim.t_final).unwrap_or(10.0),
        stride: over.stride.or(file.sim.stride).unwrap_or(100),
        seed: over.seed.or(file.sim.seed).unwrap_or(DEFAULT_SEED),
        replicas: over.replicas.or(file.sim.replicas).unwrap_or(8),
        init,
        init_b,
        offset_x: exp_over
            .offset_x
            .clone()
            .or_else(|| exp_file.offset_x.clone())
            .unwrap_or_else(|| vec![2.0; dim]),
        offset_v: exp_over
            .offset_v
            .clone()
            .or_else(|| exp_file.offset_v.clone())
            .unwrap_or_else(|| vec![0.0; dim]),
        w2_sample: exp_over.w2_sample.or(exp_file.w2_sample).unwrap_or(1024),
        ladder: exp_over
            .ladder
            .clone()
            .or_else(|| exp_file.ladder.clone())
            .unwrap_or_else(|| vec![16, 32, 64, 128, 256, 512]),
        mckean: exp_over
            .mckean
            .clone()
            .or_else(|| exp_file.mckean.clone())
            .unwrap_or_else(|| "exact".into()),
        proxy_m: exp_over.proxy_m.or(exp_file.proxy_m).unwrap_or(8192),
        uniformity_n: exp_over.uniformity_n.or(exp_file.uniformity_n),
        ns: exp_over
            .ns
            .clone()
            .or_else(|| exp_file.ns.clone())
            .unwrap_or_else(|| vec![64, 128, 256]),
        observable: exp_over
            .observable
            .clone()
            .or_else(|| exp_file.observable.clone())
            .unwrap_or_else(|| "x0".into()),
        radii_sigmas: exp_over
            .radii_sigmas
            .clone()
            .or_else(|| exp_file.radii_sigmas.clone())
            .unwrap_or_else(|| vec![0.6, 0.9, 1.2, 1.5, 1.8, 2.1]),
        reference_n: exp_over.reference_n.or(exp_file.reference_n).unwrap_or(10_000),
        reference_t: exp_over.reference_t.or(exp_file.reference_t).unwrap_or(50.0),
        snapshot: exp_over.snapshot.or(exp_file.snapshot).unwrap_or(false),
        out_dir: over
            .out
            .clone()
            .or_else(|| file.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        timestamp: if over.no_timestamp {
            false
        } else {
            file.output.timestamp.unwrap_or(true)
        },
    };

    // admissibility precheck where the underlying statement needs smallness
    if let Some(variant) = required_variant(experiment) {
        let eta0 = rates::eta0(
            cfg.coeffs.alpha,
            cfg.coeffs.alpha_prime,
            cfg.coeffs.beta,
            variant,
        )?;
        let eta = cfg.coeffs.eta();
        if eta >= eta0 {
            bail!(
                "gamma + delta = {eta} is inadmissible for '{experiment}': \
                 the smallness threshold is eta0 = {eta0:.6}"
            );
        }
    }

    Ok(cfg)
}
