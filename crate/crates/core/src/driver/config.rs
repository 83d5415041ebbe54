//! Run configuration: case defaults, flat `key = value` files and
//! command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dgsem::FluxMode;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Vortex,
    Dmr,
    Jet,
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vortex" => Ok(CaseKind::Vortex),
            "dmr" => Ok(CaseKind::Dmr),
            "jet" => Ok(CaseKind::Jet),
            other => Err(Error::Config(format!("unknown case '{other}'"))),
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::Vortex => "vortex",
            CaseKind::Dmr => "dmr",
            CaseKind::Jet => "jet",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: CaseKind,
    pub degree: usize,
    pub flux: FluxMode,
    /// Base mesh cells along x and y.
    pub nx: usize,
    pub ny: usize,
    /// Uniform refinement level of the vortex mesh.
    pub level: u8,
    pub adapt: bool,
    pub max_level: u8,
    pub c_ref: f64,
    pub c_crs: f64,
    pub amr_interval: usize,
    pub oe: bool,
    pub c_oe: f64,
    pub s: f64,
    pub limiter: bool,
    pub cfl: f64,
    /// Fixed step size; `None` uses the CFL controller.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub output_dir: Option<PathBuf>,
    /// Snapshot every this many steps; 0 writes only the final state.
    pub output_every: usize,
    pub pp_check: bool,
}

impl RunConfig {
    /// Defaults for `case` at polynomial degree `degree`.
    pub fn defaults(case: CaseKind, degree: usize) -> Self {
        let base = RunConfig {
            case,
            degree,
            flux: FluxMode::Mortar,
            nx: 10,
            ny: 10,
            level: 0,
            adapt: false,
            max_level: 1,
            c_ref: 0.1,
            c_crs: 0.1,
            amr_interval: 10,
            oe: true,
            c_oe: 0.1,
            s: 0.2,
            limiter: true,
            cfl: 0.8,
            dt: None,
            t_final: 0.2,
            output_dir: None,
            output_every: 0,
            pp_check: true,
        };
        match case {
            CaseKind::Vortex => RunConfig {
                oe: false,
                limiter: false,
                dt: Some(vortex_dt(0)),
                ..base
            },
            CaseKind::Dmr => {
                let c = if degree <= 1 { 0.2 } else { 0.05 };
                RunConfig {
                    nx: 64,
                    ny: 16,
                    adapt: true,
                    max_level: 3,
                    c_ref: c,
                    c_crs: c,
                    ..base
                }
            }
            CaseKind::Jet => RunConfig {
                nx: 75,
                ny: 38,
                adapt: true,
                max_level: 2,
                t_final: 0.001,
                ..base
            },
        }
    }

    /// Defaults for the case and degree named in `values`, overridden by
    /// every other entry.
    pub fn from_values(values: &BTreeMap<String, String>) -> Result<Self> {
        let case: CaseKind = values
            .get("case")
            .ok_or_else(|| Error::Config("missing 'case'".into()))?
            .parse()?;
        let degree = match values.get("degree") {
            Some(v) => parse_num::<usize>("degree", v)?,
            None if case == CaseKind::Vortex => 3,
            None if case == CaseKind::Jet => 3,
            None => 2,
        };
        let mut cfg = RunConfig::defaults(case, degree);
        if let Some(v) = values.get("level") {
            cfg.level = parse_num("level", v)?;
            if case == CaseKind::Vortex {
                cfg.dt = Some(vortex_dt(cfg.level));
            }
        }
        for (key, v) in values {
            match key.as_str() {
                "case" | "degree" | "level" => {}
                "flux" => cfg.flux = v.parse()?,
                "nx" => cfg.nx = parse_num(key, v)?,
                "ny" => cfg.ny = parse_num(key, v)?,
                "adapt" => cfg.adapt = parse_bool(key, v)?,
                "max_level" => cfg.max_level = parse_num(key, v)?,
                "c_ref" => cfg.c_ref = parse_num(key, v)?,
                "c_crs" => cfg.c_crs = parse_num(key, v)?,
                "amr_interval" => cfg.amr_interval = parse_num(key, v)?,
                "oe" => cfg.oe = parse_bool(key, v)?,
                "c_oe" => cfg.c_oe = parse_num(key, v)?,
                "s" => cfg.s = parse_num(key, v)?,
                "limiter" => cfg.limiter = parse_bool(key, v)?,
                "cfl" => cfg.cfl = parse_num(key, v)?,
                "dt" => {
                    cfg.dt = if v.trim() == "auto" {
                        None
                    } else {
                        Some(parse_num(key, v)?)
                    }
                }
                "t_final" | "tfinal" => cfg.t_final = parse_num(key, v)?,
                "output_dir" | "out" => cfg.output_dir = Some(PathBuf::from(v.trim())),
                "output_every" => cfg.output_every = parse_num(key, v)?,
                "pp_check" => cfg.pp_check = parse_bool(key, v)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=8).contains(&self.degree) {
            return bad(format!("degree must be in 1..=8, got {}", self.degree));
        }
        if self.nx == 0 || self.ny == 0 {
            return bad("nx and ny must be positive".into());
        }
        for (name, v) in [
            ("c_ref", self.c_ref),
            ("c_crs", self.c_crs),
            ("c_oe", self.c_oe),
            ("s", self.s),
            ("cfl", self.cfl),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.c_ref < self.c_crs {
            return bad(format!("c_ref ({}) must not be below c_crs ({})", self.c_ref, self.c_crs));
        }
        if self.amr_interval == 0 {
            return bad("amr_interval must be at least 1".into());
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.case == CaseKind::Vortex && self.nx != self.ny {
            return bad("vortex mesh must be square".into());
        }
        Ok(())
    }
}

/// Fixed vortex step `0.2 / (20 * 2^level)`.
pub fn vortex_dt(level: u8) -> f64 {
    0.2 / (20.0 * (1u64 << level) as f64)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{}' for '{key}'", v.trim())))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean '{}' for '{key}'", v.trim()))),
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(text: &str) -> BTreeMap<String, String> {
        parse_config_text(text).unwrap()
    }

    #[test]
    fn case_defaults() {
        let d = RunConfig::defaults(CaseKind::Dmr, 2);
        assert_eq!((d.c_ref, d.c_crs, d.amr_interval), (0.05, 0.05, 10));
        assert_eq!(RunConfig::defaults(CaseKind::Dmr, 1).c_ref, 0.2);
        let j = RunConfig::defaults(CaseKind::Jet, 3);
        assert_eq!((j.nx, j.ny, j.max_level, j.t_final), (75, 38, 2, 0.001));
        let v = RunConfig::defaults(CaseKind::Vortex, 3);
        assert!(!v.oe && !v.limiter);
        assert_eq!(v.dt, Some(0.01));
        assert_eq!(vortex_dt(2), 0.2 / 80.0);
    }

    #[test]
    fn parse_and_override() {
        let cfg = RunConfig::from_values(&values(
            "# comment\ncase = dmr\ndegree = 1\nflux = es\nmax_level = 2 # trailing\n",
        ))
        .unwrap();
        assert_eq!(cfg.flux, FluxMode::Es);
        assert_eq!(cfg.c_ref, 0.2);
        assert_eq!(cfg.max_level, 2);
        let v = RunConfig::from_values(&values("case = vortex\nlevel = 2\n")).unwrap();
        assert_eq!(v.dt, Some(vortex_dt(2)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "degree = 2",
            "case = cylinder",
            "case = dmr\ncfl = -1",
            "case = dmr\nc_ref = 0.01\nc_crs = 0.1",
            "case = dmr\nwhat = 1",
            "case = dmr\ndegree = 9",
            "case = jet\noe = maybe",
        ] {
            let err = RunConfig::from_values(&values(text)).unwrap_err();
            assert_eq!(err.kind(), "invalid_config", "{text}");
        }
        assert!(parse_config_text("no equals sign").is_err());
    }
}
