//! Run configuration: flat `key = value` text with dotted section names.
//!
//! Parsing is strict: unknown keys, duplicate keys and type mismatches are
//! errors that name the key and line. Defaults are materialized at parse
//! time, so serializing a parsed config and reparsing it reproduces the
//! same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cases::SweepParameter;
use crate::drag::{DragModel, DragVariant};
use crate::error::{Error, Result};
use crate::mesh::ElemKind;
use crate::solver::{InitialGuess, NewtonConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Oned,
    FiveSpot,
    Reservoir,
    Convergence,
    Sweep,
}

impl CaseKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oned" => Some(CaseKind::Oned),
            "five-spot" => Some(CaseKind::FiveSpot),
            "reservoir" => Some(CaseKind::Reservoir),
            "convergence" => Some(CaseKind::Convergence),
            "sweep" => Some(CaseKind::Sweep),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Oned => "oned",
            CaseKind::FiveSpot => "five-spot",
            CaseKind::Reservoir => "reservoir",
            CaseKind::Convergence => "convergence",
            CaseKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseKind,
    pub mesh_kind: ElemKind,
    pub mesh_nx: Option<usize>,
    pub mesh_ny: Option<usize>,
    pub mesh_file: Option<String>,
    pub drag_variant: DragVariant,
    pub drag_alpha0: f64,
    pub drag_beta: Option<f64>,
    pub per_element_alpha0: Vec<(usize, f64)>,
    pub newton: NewtonConfig,
    pub quadrature_order: Option<u32>,
    pub div_term: bool,
    pub output_dir: String,
    pub oned_p1: f64,
    pub oned_p2: f64,
    pub oned_n: usize,
    pub fivespot_n: usize,
    pub reservoir_p_enh: f64,
    pub reservoir_resolution: usize,
    pub convergence_levels: Vec<usize>,
    pub sweep_case: Option<CaseKind>,
    pub sweep_parameter: Option<SweepParameter>,
    pub sweep_values: Vec<f64>,
}

impl RunConfig {
    /// The drag model, requiring an explicit beta for the Barus variants.
    pub fn drag_model(&self) -> Result<DragModel> {
        match (self.drag_variant, self.drag_beta) {
            (DragVariant::Constant, _) => Ok(DragModel::constant(self.drag_alpha0)),
            (variant, Some(beta)) => Ok(DragModel::new(variant, self.drag_alpha0, beta)),
            (_, None) => Err(Error::InvalidArgument(
                "drag.beta is required for the linear and exponential models".into(),
            )),
        }
    }

    /// Serialize in the same flat format `parse_config` reads.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("case", self.case.name().into());
        kv("mesh.kind", self.mesh_kind.to_string());
        if let Some(nx) = self.mesh_nx {
            kv("mesh.nx", nx.to_string());
        }
        if let Some(ny) = self.mesh_ny {
            kv("mesh.ny", ny.to_string());
        }
        if let Some(file) = &self.mesh_file {
            kv("mesh.file", file.clone());
        }
        kv(
            "drag.model",
            match self.drag_variant {
                DragVariant::Constant => "constant",
                DragVariant::LinearBarus => "linear",
                DragVariant::ExponentialBarus => "exponential",
            }
            .into(),
        );
        kv("drag.alpha0", fmt_f64(self.drag_alpha0));
        if let Some(beta) = self.drag_beta {
            kv("drag.beta", fmt_f64(beta));
        }
        if !self.per_element_alpha0.is_empty() {
            let entries: Vec<String> = self
                .per_element_alpha0
                .iter()
                .map(|(id, v)| format!("{id}:{}", fmt_f64(*v)))
                .collect();
            kv("drag.per_element_alpha0", entries.join(","));
        }
        kv("newton.rtol", fmt_f64(self.newton.rtol));
        kv("newton.atol", fmt_f64(self.newton.atol));
        kv("newton.max_iter", self.newton.max_iter.to_string());
        kv(
            "newton.initial_guess",
            match self.newton.initial_guess {
                InitialGuess::Zero => "zero",
                InitialGuess::DarcyLinear => "darcy-linear",
            }
            .into(),
        );
        kv(
            "newton.line_search",
            if self.newton.line_search { "on" } else { "off" }.into(),
        );
        if let Some(order) = self.quadrature_order {
            kv("quadrature.order", order.to_string());
        }
        kv(
            "stabilization.div_term",
            if self.div_term { "on" } else { "off" }.into(),
        );
        kv("output.dir", self.output_dir.clone());
        match self.case {
            CaseKind::Oned => {
                kv("oned.p1", fmt_f64(self.oned_p1));
                kv("oned.p2", fmt_f64(self.oned_p2));
                kv("oned.n", self.oned_n.to_string());
            }
            CaseKind::FiveSpot => {
                kv("fivespot.n", self.fivespot_n.to_string());
            }
            CaseKind::Reservoir => {
                kv("reservoir.p_enh", fmt_f64(self.reservoir_p_enh));
                kv("reservoir.resolution", self.reservoir_resolution.to_string());
            }
            CaseKind::Convergence => {
                let levels: Vec<String> =
                    self.convergence_levels.iter().map(|n| n.to_string()).collect();
                kv("convergence.levels", levels.join(","));
            }
            CaseKind::Sweep => {
                if let Some(case) = self.sweep_case {
                    kv("sweep.case", case.name().into());
                }
                if let Some(p) = self.sweep_parameter {
                    kv("sweep.parameter", p.name().into());
                }
                let values: Vec<String> = self.sweep_values.iter().map(|v| fmt_f64(*v)).collect();
                kv("sweep.values", values.join(","));
            }
        }
        out
    }
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{x:?}")
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, path: &str) -> Result<RunConfig> {
    let err = |line: usize, msg: String| Error::Config {
        path: path.to_string(),
        line,
        msg,
    };

    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(err(line_no, format!("expected `key = value`, got `{stripped}`")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.contains_key(&key) {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
        entries.insert(key, (line_no, value));
    }

    let mut take = |key: &str| entries.remove(key);
    macro_rules! typed {
        ($key:expr, $default:expr, $parse:expr) => {
            match take($key) {
                Some((line, value)) => $parse(&value)
                    .ok_or_else(|| err(line, format!("bad value `{value}` for key `{}`", $key)))?,
                None => $default,
            }
        };
    }

    let case = match take("case") {
        Some((line, value)) => CaseKind::parse(&value)
            .ok_or_else(|| err(line, format!("unknown case `{value}`")))?,
        None => return Err(err(0, "missing required key `case`".into())),
    };

    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let parse_f64 = |s: &str| s.parse::<f64>().ok();
    let parse_switch = |s: &str| match s {
        "on" => Some(true),
        "off" => Some(false),
        _ => None,
    };

    let mesh_kind = typed!("mesh.kind", ElemKind::Q4, ElemKind::parse);
    let mesh_nx = typed!("mesh.nx", None, |s: &str| parse_usize(s).map(Some));
    let mesh_ny = typed!("mesh.ny", None, |s: &str| parse_usize(s).map(Some));
    let mesh_file = take("mesh.file").map(|(_, v)| v);

    let drag_variant = typed!("drag.model", DragVariant::Constant, |s: &str| match s {
        "constant" => Some(DragVariant::Constant),
        "linear" => Some(DragVariant::LinearBarus),
        "exponential" => Some(DragVariant::ExponentialBarus),
        _ => None,
    });
    let drag_alpha0 = typed!("drag.alpha0", 1.0, parse_f64);
    let drag_beta = typed!("drag.beta", None, |s: &str| parse_f64(s).map(Some));
    let per_element_alpha0 = typed!("drag.per_element_alpha0", Vec::new(), |s: &str| {
        let mut out = Vec::new();
        for item in s.split(',') {
            let (id, v) = item.split_once(':')?;
            out.push((id.trim().parse().ok()?, v.trim().parse().ok()?));
        }
        Some(out)
    });

    let newton = NewtonConfig {
        rtol: typed!("newton.rtol", 1e-12, parse_f64),
        atol: typed!("newton.atol", 1e-14, parse_f64),
        max_iter: typed!("newton.max_iter", 50, parse_usize),
        initial_guess: typed!("newton.initial_guess", InitialGuess::Zero, |s: &str| match s {
            "zero" => Some(InitialGuess::Zero),
            "darcy-linear" => Some(InitialGuess::DarcyLinear),
            _ => None,
        }),
        line_search: typed!("newton.line_search", false, parse_switch),
    };

    let quadrature_order = typed!("quadrature.order", None, |s: &str| s
        .parse::<u32>()
        .ok()
        .map(Some));
    let div_term = typed!("stabilization.div_term", false, parse_switch);
    let output_dir = take("output.dir").map(|(_, v)| v).unwrap_or_else(|| "out".into());

    let oned_p1 = typed!("oned.p1", 200.0, parse_f64);
    let oned_p2 = typed!("oned.p2", 1.0, parse_f64);
    let oned_n = typed!("oned.n", 100, parse_usize);
    let fivespot_n = typed!("fivespot.n", 20, parse_usize);
    let reservoir_p_enh = typed!("reservoir.p_enh", 5.0, parse_f64);
    let reservoir_resolution = typed!("reservoir.resolution", 40, parse_usize);
    let convergence_levels = typed!("convergence.levels", vec![10, 20, 40, 80], |s: &str| {
        let mut out = Vec::new();
        for item in s.split(',') {
            out.push(item.trim().parse().ok()?);
        }
        Some(out)
    });
    let sweep_case = typed!("sweep.case", None, |s: &str| CaseKind::parse(s).map(Some));
    let sweep_parameter = typed!("sweep.parameter", None, |s: &str| match s {
        "beta" => Some(Some(SweepParameter::Beta)),
        "p_enh" => Some(Some(SweepParameter::PEnh)),
        _ => None,
    });
    let sweep_values = typed!("sweep.values", Vec::new(), |s: &str| {
        let mut out = Vec::new();
        for item in s.split(',') {
            out.push(item.trim().parse::<f64>().ok()?);
        }
        Some(out)
    });

    if let Some((key, (line, _))) = entries.iter().next() {
        return Err(err(*line, format!("unknown key `{key}`")));
    }

    Ok(RunConfig {
        case,
        mesh_kind,
        mesh_nx,
        mesh_ny,
        mesh_file,
        drag_variant,
        drag_alpha0,
        drag_beta,
        per_element_alpha0,
        newton,
        quadrature_order,
        div_term,
        output_dir,
        oned_p1,
        oned_p2,
        oned_n,
        fivespot_n,
        reservoir_p_enh,
        reservoir_resolution,
        convergence_levels,
        sweep_case,
        sweep_parameter,
        sweep_values,
    })
}
