//! Scenario config schema.
//!
//! A config is one TOML file: a `kind`, an optional `seed` and `output`, and
//! the nested tables that kind needs. Unknown keys, missing tables and tables
//! a kind does not use are all schema errors reported with a line number.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;
use crate::formats::parse_absorption_table;
use thz_umimo::propagation::{AbsorptionTable, Medium};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Pathloss,
    Pattern,
    Coverage,
    Train,
    Squint,
    IrsTrain,
    IrsOpt,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Pathloss => "pathloss",
            Kind::Pattern => "pattern",
            Kind::Coverage => "coverage",
            Kind::Train => "train",
            Kind::Squint => "squint",
            Kind::IrsTrain => "irs-train",
            Kind::IrsOpt => "irs-opt",
        }
    }

    pub fn stochastic(self) -> bool {
        matches!(self, Kind::Train | Kind::IrsTrain | Kind::IrsOpt)
    }

    /// Tables the kind requires, then tables it accepts.
    fn tables(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Kind::Pathloss => (&["sweep"], &["medium"]),
            Kind::Pattern => (&["geometry", "sweep"], &[]),
            Kind::Coverage => (&["codebook"], &[]),
            Kind::Train => (&["codebook", "protocol"], &[]),
            Kind::Squint => (&["wideband"], &[]),
            Kind::IrsTrain => (&["codebook", "protocol"], &["irs"]),
            Kind::IrsOpt => (&["irs", "protocol"], &[]),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Spanned<Kind>,
    seed: Option<u64>,
    output: Option<String>,
    medium: Option<Spanned<MediumCfg>>,
    geometry: Option<Spanned<GeometryCfg>>,
    sweep: Option<Spanned<SweepCfg>>,
    codebook: Option<Spanned<CodebookCfg>>,
    protocol: Option<Spanned<ProtocolCfg>>,
    wideband: Option<Spanned<WidebandCfg>>,
    irs: Option<Spanned<IrsCfg>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumCfg {
    /// K.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// atm.
    #[serde(default = "default_pressure")]
    pub pressure: f64,
    /// `"reference"`, `"none"`, or a path to a `frequency_hz, k_db` table.
    #[serde(default = "default_absorption")]
    pub absorption: String,
}

fn default_temperature() -> f64 {
    296.0
}

fn default_pressure() -> f64 {
    1.0
}

fn default_absorption() -> String {
    "reference".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Ula,
    Urpa,
    Uhpa,
    Ucpa,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryCfg {
    pub kind: GeometryKind,
    /// Carrier frequency (Hz) fixing the wavelength.
    pub frequency: f64,
    pub n: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub rings: Option<usize>,
    pub circles: Option<usize>,
    pub spacing_wavelengths: Option<f64>,
    pub spacing_m: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCfg {
    // pathloss
    pub f_start: Option<f64>,
    pub f_stop: Option<f64>,
    pub distances: Option<Vec<f64>>,
    // pattern
    pub counts: Option<Vec<usize>>,
    pub steer: Option<f64>,
    // both
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookCfg {
    pub n_antennas: usize,
    pub n_beams: Option<usize>,
    pub m_ary: Option<usize>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolCfg {
    pub methods: Option<Vec<String>>,
    pub trials: usize,
    pub noise_var: Option<f64>,
    pub n_rf: Option<usize>,
    pub on_grid: Option<bool>,
    pub pulse_factor: Option<f64>,
    pub irs_reference: Option<bool>,
    pub max_iters: Option<usize>,
    pub sweeps: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidebandCfg {
    pub carrier: f64,
    pub bandwidth: f64,
    pub n_antennas: usize,
    /// Defaults to half a carrier wavelength.
    pub spacing_m: Option<f64>,
    /// Defaults to `1/bandwidth`.
    pub symbol_period: Option<f64>,
    /// Combiner direction (rad).
    pub steer: f64,
    pub f_points: usize,
    pub psi_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsCfg {
    // irs-train path gains
    pub alpha_h: Option<f64>,
    pub alpha_m: Option<f64>,
    pub alpha_n: Option<f64>,
    // irs-opt
    pub n_bs: Option<usize>,
    pub n_user: Option<usize>,
    pub n_irs: Option<usize>,
    pub power: Option<f64>,
    pub noise_var: Option<f64>,
    pub n_streams: Option<usize>,
    pub los_variance: Option<f64>,
    pub cascade_variance: Option<f64>,
    pub amplitude: Option<f64>,
}

/// Geometry ready for `ArrayGeometry` construction.
#[derive(Debug, Clone)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub wavelength: f64,
    pub spacing: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Params {
    Pathloss {
        medium: Medium,
        frequencies: Vec<f64>,
        distances: Vec<f64>,
    },
    Pattern {
        geometry: GeometrySpec,
        steer: f64,
        points: usize,
    },
    Coverage {
        n_antennas: usize,
        n_beams: usize,
        rho: Option<f64>,
    },
    Train {
        n: usize,
        m_ary: Option<usize>,
        methods: Vec<String>,
        trials: usize,
        noise_var: f64,
        n_rf: usize,
        on_grid: bool,
    },
    Squint(WidebandCfg),
    IrsTrain {
        n: usize,
        methods: Vec<String>,
        trials: usize,
        noise_var: f64,
        pulse_factor: f64,
        irs_reference: bool,
        alphas: [f64; 3],
    },
    IrsOpt {
        n_bs: usize,
        n_user: usize,
        n_irs: usize,
        power: f64,
        noise_var: f64,
        n_streams: usize,
        los_variance: f64,
        cascade_variance: f64,
        amplitude: f64,
        trials: usize,
        max_iters: usize,
        sweeps: usize,
        tol: f64,
    },
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub params: Params,
}

pub const TRAIN_METHODS: [&str; 5] = ["exhaustive", "one_sided", "parallel", "tree_one", "tree_both"];
pub const IRS_METHODS: [&str; 2] = ["cooperative", "primary"];

/// Error context: file name, source text and the byte offset to report.
struct Ctx<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Ctx<'_> {
    fn at(&self, span: Range<usize>, msg: impl std::fmt::Display) -> CliError {
        let (line, col) = line_col(self.text, span.start);
        CliError::Schema(format!("{}:{line}:{col}: {msg}", self.path.display()))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn need<T: Clone>(ctx: &Ctx, table: &Spanned<impl Sized>, name: &str, value: &Option<T>) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| ctx.at(table.span(), format!("missing key `{name}`")))
}

fn forbid<T>(ctx: &Ctx, table: &Spanned<impl Sized>, kind: Kind, name: &str, value: &Option<T>) -> Result<(), CliError> {
    match value {
        Some(_) => Err(ctx.at(table.span(), format!("key `{name}` is not used by kind `{}`", kind.name()))),
        None => Ok(()),
    }
}

fn check_methods(ctx: &Ctx, table: &Spanned<ProtocolCfg>, allowed: &[&str], default: &[&str]) -> Result<Vec<String>, CliError> {
    let methods = table
        .get_ref()
        .methods
        .clone()
        .unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect());
    if methods.is_empty() {
        return Err(ctx.at(table.span(), "`methods` is empty"));
    }
    for m in &methods {
        if !allowed.contains(&m.as_str()) {
            return Err(ctx.at(
                table.span(),
                format!("unknown method `{m}`; expected one of {}", allowed.join(", ")),
            ));
        }
    }
    Ok(methods)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Parses and validates config `text` read from `path`. Referenced files
/// are resolved against the config's directory.
pub fn parse(path: &Path, text: &str) -> Result<Scenario, CliError> {
    let ctx = Ctx { path, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        ctx.at(span, e.message().trim_end())
    })?;
    let kind = *raw.kind.get_ref();
    let kind_span = raw.kind.span();

    let present: [(&str, Option<Range<usize>>); 7] = [
        ("medium", raw.medium.as_ref().map(Spanned::span)),
        ("geometry", raw.geometry.as_ref().map(Spanned::span)),
        ("sweep", raw.sweep.as_ref().map(Spanned::span)),
        ("codebook", raw.codebook.as_ref().map(Spanned::span)),
        ("protocol", raw.protocol.as_ref().map(Spanned::span)),
        ("wideband", raw.wideband.as_ref().map(Spanned::span)),
        ("irs", raw.irs.as_ref().map(Spanned::span)),
    ];
    let (required, optional) = kind.tables();
    for (name, span) in &present {
        match span {
            Some(s) if !required.contains(name) && !optional.contains(name) => {
                return Err(ctx.at(s.clone(), format!("table [{name}] is not used by kind `{}`", kind.name())));
            }
            None if required.contains(name) => {
                return Err(ctx.at(kind_span.clone(), format!("kind `{}` requires a [{name}] table", kind.name())));
            }
            _ => {}
        }
    }
    if kind.stochastic() && raw.seed.is_none() {
        return Err(ctx.at(kind_span, format!("kind `{}` is stochastic and needs a `seed`", kind.name())));
    }
    let base = path.parent().unwrap_or(Path::new("."));

    let params = match kind {
        Kind::Pathloss => {
            let sweep = raw.sweep.as_ref().expect("checked");
            let s = sweep.get_ref();
            forbid(&ctx, sweep, kind, "counts", &s.counts)?;
            forbid(&ctx, sweep, kind, "steer", &s.steer)?;
            let f_start = need(&ctx, sweep, "f_start", &s.f_start)?;
            let f_stop = need(&ctx, sweep, "f_stop", &s.f_stop)?;
            let points = need(&ctx, sweep, "points", &s.points)?;
            let distances = need(&ctx, sweep, "distances", &s.distances)?;
            if points == 0 || distances.is_empty() {
                return Err(ctx.at(sweep.span(), "`points` and `distances` must be non-empty"));
            }
            let medium = match &raw.medium {
                None => Medium::standard(),
                Some(m) => medium(&ctx, base, m)?,
            };
            Params::Pathloss {
                medium,
                frequencies: linspace(f_start, f_stop, points),
                distances,
            }
        }
        Kind::Pattern => {
            let sweep = raw.sweep.as_ref().expect("checked");
            let s = sweep.get_ref();
            for (name, set) in [("f_start", s.f_start.is_some()), ("f_stop", s.f_stop.is_some()), ("distances", s.distances.is_some())] {
                if set {
                    return Err(ctx.at(sweep.span(), format!("key `{name}` is not used by kind `pattern`")));
                }
            }
            let g = raw.geometry.as_ref().expect("checked");
            let mut geometry = geometry(&ctx, g)?;
            if let Some(counts) = &s.counts {
                if geometry.kind != GeometryKind::Ula {
                    return Err(ctx.at(sweep.span(), "`counts` only applies to a ULA geometry"));
                }
                if counts.is_empty() {
                    return Err(ctx.at(sweep.span(), "`counts` is empty"));
                }
                geometry.counts = counts.clone();
            }
            let points = need(&ctx, sweep, "points", &s.points)?;
            if points == 0 {
                return Err(ctx.at(sweep.span(), "`points` must be >= 1"));
            }
            Params::Pattern {
                geometry,
                steer: s.steer.unwrap_or(0.0),
                points,
            }
        }
        Kind::Coverage => {
            let cb = raw.codebook.as_ref().expect("checked");
            let c = cb.get_ref();
            forbid(&ctx, cb, kind, "m_ary", &c.m_ary)?;
            Params::Coverage {
                n_antennas: c.n_antennas,
                n_beams: c.n_beams.unwrap_or(c.n_antennas),
                rho: c.rho,
            }
        }
        Kind::Train => {
            let cb = raw.codebook.as_ref().expect("checked");
            let c = cb.get_ref();
            forbid(&ctx, cb, kind, "rho", &c.rho)?;
            if c.n_beams.is_some_and(|b| b != c.n_antennas) {
                return Err(ctx.at(cb.span(), "training uses one beam per antenna; drop `n_beams`"));
            }
            let proto = raw.protocol.as_ref().expect("checked");
            let p = proto.get_ref();
            for (name, set) in [
                ("pulse_factor", p.pulse_factor.is_some()),
                ("irs_reference", p.irs_reference.is_some()),
                ("max_iters", p.max_iters.is_some()),
                ("sweeps", p.sweeps.is_some()),
                ("tol", p.tol.is_some()),
            ] {
                if set {
                    return Err(ctx.at(proto.span(), format!("key `{name}` is not used by kind `train`")));
                }
            }
            let methods = check_methods(&ctx, proto, &TRAIN_METHODS, &TRAIN_METHODS)?;
            if methods.iter().any(|m| m.starts_with("tree")) && c.m_ary.is_none() {
                return Err(ctx.at(cb.span(), "tree methods need `m_ary`"));
            }
            trials_positive(&ctx, proto)?;
            Params::Train {
                n: c.n_antennas,
                m_ary: c.m_ary,
                methods,
                trials: p.trials,
                noise_var: p.noise_var.unwrap_or(0.0),
                n_rf: p.n_rf.unwrap_or(1),
                on_grid: p.on_grid.unwrap_or(true),
            }
        }
        Kind::Squint => Params::Squint(raw.wideband.as_ref().expect("checked").get_ref().clone()),
        Kind::IrsTrain => {
            let cb = raw.codebook.as_ref().expect("checked");
            let c = cb.get_ref();
            forbid(&ctx, cb, kind, "m_ary", &c.m_ary)?;
            forbid(&ctx, cb, kind, "rho", &c.rho)?;
            forbid(&ctx, cb, kind, "n_beams", &c.n_beams)?;
            let proto = raw.protocol.as_ref().expect("checked");
            let p = proto.get_ref();
            for (name, set) in [
                ("n_rf", p.n_rf.is_some()),
                ("on_grid", p.on_grid.is_some()),
                ("max_iters", p.max_iters.is_some()),
                ("sweeps", p.sweeps.is_some()),
                ("tol", p.tol.is_some()),
            ] {
                if set {
                    return Err(ctx.at(proto.span(), format!("key `{name}` is not used by kind `irs-train`")));
                }
            }
            let methods = check_methods(&ctx, proto, &IRS_METHODS, &IRS_METHODS)?;
            trials_positive(&ctx, proto)?;
            let alphas = match &raw.irs {
                None => [0.05, 1.0, 1.0],
                Some(t) => {
                    let i = t.get_ref();
                    for (name, set) in [
                        ("n_bs", i.n_bs.is_some()),
                        ("n_user", i.n_user.is_some()),
                        ("n_irs", i.n_irs.is_some()),
                        ("power", i.power.is_some()),
                        ("noise_var", i.noise_var.is_some()),
                        ("n_streams", i.n_streams.is_some()),
                        ("los_variance", i.los_variance.is_some()),
                        ("cascade_variance", i.cascade_variance.is_some()),
                        ("amplitude", i.amplitude.is_some()),
                    ] {
                        if set {
                            return Err(ctx.at(t.span(), format!("key `{name}` is not used by kind `irs-train`")));
                        }
                    }
                    [i.alpha_h.unwrap_or(0.05), i.alpha_m.unwrap_or(1.0), i.alpha_n.unwrap_or(1.0)]
                }
            };
            Params::IrsTrain {
                n: c.n_antennas,
                methods,
                trials: p.trials,
                noise_var: p.noise_var.unwrap_or(0.0),
                pulse_factor: p.pulse_factor.unwrap_or(10.0),
                irs_reference: p.irs_reference.unwrap_or(false),
                alphas,
            }
        }
        Kind::IrsOpt => {
            let t = raw.irs.as_ref().expect("checked");
            let i = t.get_ref();
            for (name, set) in [
                ("alpha_h", i.alpha_h.is_some()),
                ("alpha_m", i.alpha_m.is_some()),
                ("alpha_n", i.alpha_n.is_some()),
            ] {
                if set {
                    return Err(ctx.at(t.span(), format!("key `{name}` is not used by kind `irs-opt`")));
                }
            }
            let proto = raw.protocol.as_ref().expect("checked");
            let p = proto.get_ref();
            for (name, set) in [
                ("methods", p.methods.is_some()),
                ("noise_var", p.noise_var.is_some()),
                ("n_rf", p.n_rf.is_some()),
                ("on_grid", p.on_grid.is_some()),
                ("pulse_factor", p.pulse_factor.is_some()),
                ("irs_reference", p.irs_reference.is_some()),
            ] {
                if set {
                    return Err(ctx.at(proto.span(), format!("key `{name}` is not used by kind `irs-opt`")));
                }
            }
            trials_positive(&ctx, proto)?;
            Params::IrsOpt {
                n_bs: need(&ctx, t, "n_bs", &i.n_bs)?,
                n_user: need(&ctx, t, "n_user", &i.n_user)?,
                n_irs: need(&ctx, t, "n_irs", &i.n_irs)?,
                power: need(&ctx, t, "power", &i.power)?,
                noise_var: need(&ctx, t, "noise_var", &i.noise_var)?,
                n_streams: need(&ctx, t, "n_streams", &i.n_streams)?,
                los_variance: i.los_variance.unwrap_or(0.01),
                cascade_variance: i.cascade_variance.unwrap_or(1.0),
                amplitude: i.amplitude.unwrap_or(1.0),
                trials: p.trials,
                max_iters: p.max_iters.unwrap_or(50),
                sweeps: p.sweeps.unwrap_or(2),
                tol: p.tol.unwrap_or(1e-9),
            }
        }
    };

    Ok(Scenario {
        kind,
        seed: raw.seed,
        output: raw.output.map(|o| base.join(o)),
        params,
    })
}

fn trials_positive(ctx: &Ctx, proto: &Spanned<ProtocolCfg>) -> Result<(), CliError> {
    if proto.get_ref().trials == 0 {
        return Err(ctx.at(proto.span(), "`trials` must be >= 1"));
    }
    Ok(())
}

fn medium(ctx: &Ctx, base: &Path, m: &Spanned<MediumCfg>) -> Result<Medium, CliError> {
    let cfg = m.get_ref();
    let table = match cfg.absorption.as_str() {
        "reference" => AbsorptionTable::reference(),
        "none" => AbsorptionTable::vacuum(1e9, 10e12)?,
        file => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ctx.at(m.span(), format!("cannot read absorption table {}: {e}", path.display())))?;
            parse_absorption_table(&path, &text)?
        }
    };
    Ok(Medium::new(cfg.temperature, cfg.pressure, table)?)
}

fn geometry(ctx: &Ctx, g: &Spanned<GeometryCfg>) -> Result<GeometrySpec, CliError> {
    let cfg = g.get_ref();
    if cfg.spacing_wavelengths.is_some() && cfg.spacing_m.is_some() {
        return Err(ctx.at(g.span(), "give `spacing_wavelengths` or `spacing_m`, not both"));
    }
    if !(cfg.frequency > 0.0) {
        return Err(ctx.at(g.span(), "`frequency` must be positive"));
    }
    let wavelength = thz_umimo::wavelength(cfg.frequency);
    let spacing = match (cfg.spacing_wavelengths, cfg.spacing_m) {
        (Some(w), None) => w * wavelength,
        (None, Some(m)) => m,
        _ => wavelength / 2.0,
    };
    let keys = [
        ("n", cfg.n),
        ("ny", cfg.ny),
        ("nz", cfg.nz),
        ("rings", cfg.rings),
        ("circles", cfg.circles),
    ];
    let wanted: &[&str] = match cfg.kind {
        GeometryKind::Ula => &["n"],
        GeometryKind::Urpa => &["ny", "nz"],
        GeometryKind::Uhpa => &["rings"],
        GeometryKind::Ucpa => &["circles"],
    };
    let mut counts = Vec::new();
    for (name, v) in keys {
        match (wanted.contains(&name), v) {
            (true, Some(v)) => counts.push(v),
            (true, None) => return Err(ctx.at(g.span(), format!("missing key `{name}`"))),
            (false, Some(_)) => return Err(ctx.at(g.span(), format!("key `{name}` does not apply to this array kind"))),
            (false, None) => {}
        }
    }
    Ok(GeometrySpec {
        kind: cfg.kind,
        wavelength,
        spacing,
        counts,
    })
}
