//! Text formats read and written by the command-line tool.
//!
//! Spec and parameter files are `key = value` lines; `#` starts a comment.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use bwext::order_estimation::RegionParams;
use bwext::response_eval::{filter_response, verification_grid};
use bwext::{AdcModel, DesignSpec, ErrorReference, EstimatorParams, FirFilter, GridConfig};

use crate::CliError;

/// Parses `key = value` lines, rejecting duplicates and malformed lines.
fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("{origin}:{}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::invalid(format!("{origin}:{}: empty key or value", i + 1)));
        }
        if out.insert(k.clone(), v).is_some() {
            return Err(CliError::invalid(format!("{origin}:{}: duplicate key {k}", i + 1)));
        }
    }
    Ok(out)
}

fn number(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::invalid(format!("{key}: not a finite number: {v}")))
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse::<usize>()
        .map_err(|_| CliError::invalid(format!("{key}: not a nonnegative integer: {v}")))
}

/// A ripple bound, either linear or as an attenuation with a `dB` suffix.
pub fn ripple(key: &str, v: &str) -> Result<f64, CliError> {
    match v.strip_suffix("dB").or_else(|| v.strip_suffix("db")) {
        Some(db) => Ok(10f64.powf(-number(key, db.trim())? / 20.0)),
        None => number(key, v),
    }
}

const SPEC_KEYS: [&str; 10] = [
    "omega_e",
    "omega_c",
    "delta_omega",
    "delta_p",
    "delta_s",
    "n_grid",
    "n_theta",
    "n_verify",
    "min_density",
    "error_reference",
];

/// Contents of a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub spec: DesignSpec,
    pub model: AdcModel,
    pub grid: GridConfig,
}

impl SpecFile {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = read(path)?;
        Self::parse(&text, &path.display().to_string(), overrides)
    }

    /// Parses spec text; `overrides` are `key=value` strings applied on top.
    pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut kv = parse_pairs(text, origin)?;
        let extra = parse_pairs(&overrides.join("\n"), "--set")?;
        kv.extend(extra);
        if let Some(k) = kv.keys().find(|k| !SPEC_KEYS.contains(&k.as_str())) {
            return Err(CliError::invalid(format!("{origin}: unknown key {k}")));
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| CliError::invalid(format!("{origin}: missing key {k}")));

        let omega_e = number("omega_e", get("omega_e")?)?;
        let delta_omega = number("delta_omega", get("delta_omega")?)?;
        let delta_p = ripple("delta_p", get("delta_p")?)?;
        let delta_s = ripple("delta_s", get("delta_s")?)?;
        let reference = match kv.get("error_reference").map(String::as_str) {
            None | Some("equalizer") => ErrorReference::Equalizer,
            Some("output") => ErrorReference::Output,
            Some(other) => {
                return Err(CliError::invalid(format!(
                    "error_reference must be equalizer or output, got {other}"
                )))
            }
        };
        let spec = DesignSpec::from_pi_units(omega_e, delta_omega, delta_p, delta_s)?.with_reference(reference);

        let model = match get("omega_c")?.as_str() {
            "ideal" => AdcModel::Ideal,
            v => AdcModel::first_order_rc(number("omega_c", v)? * PI)?,
        };

        let mut grid = GridConfig::default();
        if let Some(v) = kv.get("n_grid") {
            grid.n_omega = count("n_grid", v)?;
        }
        if let Some(v) = kv.get("n_theta") {
            grid.n_theta = count("n_theta", v)?;
        }
        grid.n_verify = match kv.get("n_verify") {
            Some(v) => count("n_verify", v)?,
            None => grid.n_verify.max(4 * grid.n_omega),
        };
        if let Some(v) = kv.get("min_density") {
            grid.min_density = number("min_density", v)?;
        }
        grid.validate()?;
        Ok(SpecFile { spec, model, grid })
    }
}

const PARAM_NAMES: [&str; 9] = ["P1", "P2", "P3", "P4", "Q1", "Q2", "Q3", "Q4", "Q5"];

pub fn parse_params(text: &str, origin: &str) -> Result<EstimatorParams, CliError> {
    let kv = parse_pairs(text, origin)?;
    let mut values = BTreeMap::new();
    for (k, v) in &kv {
        let known = k
            .split_once('.')
            .is_some_and(|(r, p)| (r == "region1" || r == "region2") && PARAM_NAMES.contains(&p));
        if !known {
            return Err(CliError::invalid(format!("{origin}: unknown key {k}")));
        }
        values.insert(k.as_str(), number(k, v)?);
    }
    let region = |r: &str| -> Result<RegionParams, CliError> {
        let v = PARAM_NAMES
            .iter()
            .map(|p| {
                let key = format!("{r}.{p}");
                values
                    .get(key.as_str())
                    .copied()
                    .ok_or_else(|| CliError::invalid(format!("{origin}: missing key {key}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RegionParams::from_slice(&v))
    };
    Ok(EstimatorParams {
        region1: region("region1")?,
        region2: region("region2")?,
    })
}

pub fn load_params(path: Option<&Path>) -> Result<EstimatorParams, CliError> {
    match path {
        Some(p) => parse_params(&read(p)?, &p.display().to_string()),
        None => Ok(EstimatorParams::default()),
    }
}

/// Parameter file text. Values use the shortest representation that reads back exactly.
pub fn format_params(params: &EstimatorParams) -> String {
    let mut out = String::new();
    for (name, rp) in [("region1", &params.region1), ("region2", &params.region2)] {
        for (p, v) in PARAM_NAMES.iter().zip(rp.to_vec()) {
            writeln!(out, "{name}.{p} = {v:?}").unwrap();
        }
    }
    out
}

/// One coefficient per line with 17 significant digits.
pub fn format_coeffs(filter: &FirFilter) -> String {
    filter.coeffs().iter().map(|h| format!("{h:.16e}\n")).collect()
}

pub fn parse_coeffs(text: &str, origin: &str) -> Result<FirFilter, CliError> {
    let coeffs = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| number(origin, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FirFilter::new(coeffs)?)
}

/// Verification-grid response of the cascade: magnitude and phase of `R_c`
/// (phase relative to the target delay `N/2`) and magnitude of `H_r`.
pub fn response_csv(filter: &FirFilter, model: &AdcModel, spec: &DesignSpec, n_verify: usize) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["omega_over_pi", "mag_db_Rc", "phase_rad_Rc", "mag_db_Hr"])?;
    let delay = filter.group_delay();
    for (x, _) in verification_grid(spec, n_verify) {
        let hr = filter_response(filter, x);
        let rc = hr * model.response(x)?;
        let phase = (rc * num_complex::Complex64::cis(x * delay)).arg();
        let db = |v: f64| 20.0 * v.log10();
        w.write_record([
            format!("{:.12}", x / PI),
            format!("{:.9}", db(rc.norm())),
            format!("{:.9}", phase),
            format!("{:.9}", db(hr.norm())),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::failure(format!("response buffer: {e}")))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}
