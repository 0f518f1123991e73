use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use metric_fractals::formats::{parse_ifs, parse_metric, parse_points_csv, IfsFile, MetricFile, Num};
use metric_fractals::ifs::{examples, Ifs};
use metric_fractals::kameyama::ExkamPoint;
use metric_fractals::metric::FiniteMetricSpace;
use metric_fractals::realization::{ZSpace, ZSpaceSpec};
use metric_fractals::scalar::{parse_rational, rat, Rational};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    #[default]
    Exact,
    Numeric,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Numeric => "numeric",
        }
    }
}

/// Built-in systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemExample {
    /// `{x/3, x/3 + 2/3}`
    Cantor,
    /// `{x/2, x/2 + 1/2}`
    Halves,
    /// `{z/2, c z/2, 1}` in the plane, numeric only
    Kameyama,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceExample {
    /// Star with three unit legs; not of negative type.
    Tripod,
    /// Two pairs at distance 1/16, the pairs at distance 1.
    Ultra,
    Point,
}

pub enum System {
    Exact(Ifs<Rational>),
    Numeric(Ifs<f64>),
}

impl System {
    pub fn numeric(&self) -> Ifs<f64> {
        match self {
            System::Exact(ifs) => ifs.to_f64(),
            System::Numeric(ifs) => ifs.clone(),
        }
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn rational(name: &str, text: &str) -> Result<Rational> {
    parse_rational(text).map_err(|e| anyhow!("--{name}: {e}"))
}

pub fn example_ifs_file(ex: SystemExample) -> Option<IfsFile> {
    match ex {
        SystemExample::Cantor => Some(IfsFile::from_ifs(&examples::cantor())),
        SystemExample::Halves => Some(IfsFile::from_ifs(&examples::halves())),
        SystemExample::Kameyama => None,
    }
}

/// Loads `--ifs` or `--example`; returns the system and the input label.
pub fn load_system(file: Option<&Path>, example: Option<SystemExample>, backend: Backend) -> Result<(System, String)> {
    let (exact, label) = match (file, example) {
        (Some(_), Some(_)) => bail!("give either --ifs or --example, not both"),
        (None, None) => bail!("an input system is required (--ifs FILE or --example NAME)"),
        (Some(p), None) => (parse_ifs(&read(p)?)?, p.display().to_string()),
        (None, Some(SystemExample::Kameyama)) => {
            if backend == Backend::Exact {
                bail!("the kameyama example has irrational coefficients; use --backend numeric");
            }
            return Ok((System::Numeric(examples::kameyama(examples::KAMEYAMA_ANGLE)), "example:kameyama".into()));
        }
        (None, Some(SystemExample::Cantor)) => (examples::cantor(), "example:cantor".into()),
        (None, Some(SystemExample::Halves)) => (examples::halves(), "example:halves".into()),
    };
    Ok(match backend {
        Backend::Exact => (System::Exact(exact), label),
        Backend::Numeric => (System::Numeric(exact.to_f64()), label),
    })
}

pub fn example_space(ex: SpaceExample) -> MetricFile {
    let n = |p: i64, q: i64| Num::exact(&rat(p, q));
    let dist = match ex {
        SpaceExample::Tripod => (0..4)
            .map(|i| (0..4).map(|j| if i == j { n(0, 1) } else if i == 0 || j == 0 { n(1, 1) } else { n(2, 1) }).collect())
            .collect(),
        SpaceExample::Ultra => (0..4)
            .map(|i| (0..4).map(|j| if i == j { n(0, 1) } else if i ^ 1 == j { n(1, 16) } else { n(1, 1) }).collect())
            .collect(),
        SpaceExample::Point => vec![vec![n(0, 1)]],
    };
    MetricFile { labels: None, dist }
}

pub fn load_space(file: Option<&Path>, example: Option<SpaceExample>, tol: f64) -> Result<(FiniteMetricSpace<Rational>, String)> {
    match (file, example) {
        (Some(_), Some(_)) => bail!("give either --space or --example, not both"),
        (None, None) => bail!("an input space is required (--space FILE or --example NAME)"),
        (Some(p), None) => Ok((parse_metric(&read(p)?, tol)?, p.display().to_string())),
        (None, Some(ex)) => {
            let text = serde_json::to_string(&example_space(ex))?;
            Ok((parse_metric(&text, tol)?, format!("example:{}", ex.to_possible_value().expect("named").get_name())))
        }
    }
}

pub fn desk_zspace() -> ZSpaceSpec {
    let extras = [("1", "11"), ("01", "0101"), ("", "101"), ("110", "0011"), ("0", "1101")];
    ZSpaceSpec { extras: extras.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect() }
}

pub const DESK_Y: &str = "# Y in [0,1]^2\n0,0\n1,1/2\n1/3,1/4\n3/8,1/4\n";

pub fn load_zspace(path: &Path) -> Result<ZSpace> {
    let spec: ZSpaceSpec = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(ZSpace::from_spec(&spec)?)
}

pub fn load_points(path: &Path) -> Result<Vec<Vec<Rational>>> {
    Ok(parse_points_csv(&read(path)?)?)
}

/// A JSON list of string pairs.
pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    serde_json::from_str(&read(path)?).with_context(|| format!("{}: expected [[\"x\", \"y\"], ...]", path.display()))
}

/// `0` or `x_n,k` (also `x_n_k`).
pub fn parse_exkam(s: &str) -> Result<ExkamPoint> {
    let s = s.trim();
    if s == "0" {
        return Ok(ExkamPoint::Zero);
    }
    let body = s.strip_prefix("x_").or_else(|| s.strip_prefix('x')).ok_or_else(|| anyhow!("bad point {s:?}"))?;
    let (n, k) = body.split_once([',', '_']).ok_or_else(|| anyhow!("bad point {s:?}, expected x_n,k"))?;
    Ok(ExkamPoint::x(n.trim().parse()?, k.trim().parse()?)?)
}

/// `w(t)` is the code `w t t t ...`; a bare `w` repeats its last letter.
pub fn parse_address(s: &str, alphabet: usize) -> Result<(Vec<usize>, usize)> {
    let s = s.trim();
    let letters = |t: &str| -> Result<Vec<usize>> {
        t.chars()
            .map(|c| {
                let d = c.to_digit(10).ok_or_else(|| anyhow!("bad letter {c:?} in {s:?}"))? as usize;
                if d >= alphabet {
                    bail!("letter {d} in {s:?} is outside the alphabet 0..{alphabet}");
                }
                Ok(d)
            })
            .collect()
    };
    if let Some(open) = s.find('(') {
        let tail = s[open + 1..].strip_suffix(')').ok_or_else(|| anyhow!("unclosed tail in {s:?}"))?;
        let tail = letters(tail)?;
        if tail.len() != 1 {
            bail!("the repeated tail in {s:?} must be a single letter");
        }
        return Ok((letters(&s[..open])?, tail[0]));
    }
    let mut w = letters(s)?;
    let tail = w.pop().ok_or_else(|| anyhow!("empty address"))?;
    Ok((w, tail))
}

pub fn parse_word(s: &str, alphabet: usize) -> Result<Vec<usize>> {
    let (mut w, t) = parse_address(s, alphabet)?;
    w.push(t);
    Ok(w)
}
