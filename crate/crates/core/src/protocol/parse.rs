//! Section-based protocol files.
//!
//! ```text
//! # comment
//! [field]
//! mass = 1
//! backend = quadrature
//!
//! [function g]
//! kind = cosine
//! center = 2.0, 3.9
//! half_width = 0.4
//!
//! [op 1]
//! agent = Alice
//! map = kick
//! field = h
//! strength = lambda
//!
//! [readout]
//! agent = Bob
//! observable = phi(g)
//! sweep = -1:1:0.5
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use super::observable::parse_observable_at;
use super::{
    Backend, FieldConfig, FunctionDef, FunctionSource, MapSpec, OpSpec, ProtocolSpec, Readout, Strength, Sweep,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::smearing::{BumpKind, BumpSpec, QuadratureConfig};

#[derive(Debug, Clone)]
struct Value {
    text: String,
    line: usize,
    col: usize,
}

impl Value {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, column: self.col, message: message.into() })
    }

    fn number(&self) -> Result<f64> {
        parse_number(&self.text, false).map_or_else(|| self.err(format!("malformed number '{}'", self.text)), Ok)
    }

    fn positive(&self) -> Result<f64> {
        let v = self.number()?;
        if v > 0.0 {
            Ok(v)
        } else {
            self.err(format!("expected a positive number, found '{}'", self.text))
        }
    }

    fn integer(&self) -> Result<u64> {
        self.text.parse().map_or_else(|_| self.err(format!("malformed integer '{}'", self.text)), Ok)
    }

    /// Comma-separated numbers with their columns.
    fn list(&self, allow_infinite: bool) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for part in self.text.split(',') {
            let lead = part.len() - part.trim_start().len();
            let item = part.trim();
            match parse_number(item, allow_infinite) {
                Some(v) => out.push(v),
                None => {
                    return Err(Error::Parse {
                        line: self.line,
                        column: self.col + self.text[..offset + lead].chars().count(),
                        message: format!("malformed number '{item}'"),
                    })
                }
            }
            offset += part.len() + 1;
        }
        Ok(out)
    }

    fn names(&self) -> Vec<String> {
        self.text.split(',').map(|s| s.trim().to_string()).collect()
    }
}

fn parse_number(s: &str, allow_infinite: bool) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    (v.is_finite() || (allow_infinite && v.is_infinite())).then_some(v)
}

#[derive(Debug)]
struct Section {
    header: String,
    arg: Option<String>,
    line: usize,
    col: usize,
    keys: BTreeMap<String, (usize, usize, Value)>,
}

impl Section {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, column: self.col, message: message.into() })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.keys.remove(key).map(|(_, _, v)| v)
    }

    fn require(&mut self, key: &str) -> Result<Value> {
        match self.take(key) {
            Some(v) => Ok(v),
            None => self.err(format!("[{}] is missing the key '{key}'", self.title())),
        }
    }

    fn title(&self) -> String {
        match &self.arg {
            Some(a) => format!("{} {a}", self.header),
            None => self.header.clone(),
        }
    }

    /// Fails on the first key nobody consumed.
    fn finish(self) -> Result<()> {
        match self.keys.into_iter().min_by_key(|(_, (l, c, _))| (*l, *c)) {
            Some((k, (line, column, _))) => Err(Error::Parse {
                line,
                column,
                message: format!("unknown key '{k}' in [{}]", self.header),
            }),
            None => Ok(()),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.chars().take_while(|c| c.is_whitespace()).count();
        let col = indent + 1;
        if let Some(inner) = trimmed.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                return Err(Error::Parse { line, column: col, message: "unterminated section header".into() });
            };
            let mut parts = inner.split_whitespace();
            let header = parts.next().unwrap_or("").to_string();
            let arg = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(Error::Parse { line, column: col, message: "too many words in section header".into() });
            }
            let ok = match header.as_str() {
                "field" | "readout" => arg.is_none(),
                "function" | "op" => arg.is_some(),
                _ => return Err(Error::Parse { line, column: col + 1, message: format!("unknown section '{header}'") }),
            };
            if !ok {
                return Err(Error::Parse { line, column: col, message: format!("malformed [{header}] header") });
            }
            sections.push(Section { header, arg, line, col, keys: BTreeMap::new() });
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(Error::Parse { line, column: col, message: "expected 'key = value'".into() });
        };
        let key = body[..eq].trim().to_string();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Parse { line, column: col, message: format!("malformed key '{key}'") });
        }
        let after = &body[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value = Value {
            text: after.trim().to_string(),
            line,
            col: body[..eq + 1 + lead].chars().count() + 1,
        };
        let Some(sec) = sections.last_mut() else {
            return Err(Error::Parse { line, column: col, message: "key outside of any section".into() });
        };
        if let Some((first, _, _)) = sec.keys.get(&key) {
            return Err(Error::Parse {
                line,
                column: col,
                message: format!("duplicate key '{key}' (first given on line {first})"),
            });
        }
        sec.keys.insert(key, (line, col, value));
    }
    Ok(sections)
}

fn parse_regions(v: &Value) -> Result<Vec<Rect>> {
    let mut out = Vec::new();
    for part in v.text.split(';') {
        let nums: Option<Vec<f64>> = part.split_whitespace().map(|s| parse_number(s, false)).collect();
        match nums.as_deref() {
            Some(&[a, b, c, d]) => match Rect::new(a, b, c, d) {
                Ok(r) => out.push(r),
                Err(e) => return v.err(e.to_string()),
            },
            _ => return v.err(format!("expected 't_lo t_hi x_lo x_hi', found '{}'", part.trim())),
        }
    }
    Ok(out)
}

fn parse_field(mut s: Section) -> Result<FieldConfig> {
    let mut f = FieldConfig::default();
    if let Some(v) = s.take("mass") {
        f.mass = v.number()?;
        if f.mass < 0.0 {
            return v.err("mass must be non-negative");
        }
    }
    if let Some(v) = s.take("backend") {
        f.backend = match v.text.as_str() {
            "quadrature" => Backend::Quadrature,
            "lattice" => Backend::Lattice,
            other => return v.err(format!("unknown backend '{other}' (quadrature or lattice)")),
        };
    }
    if let Some(v) = s.take("quad_dx") {
        f.quadrature.dx = v.positive()?;
    }
    if let Some(v) = s.take("quad_levels") {
        f.quadrature.levels = v.integer()? as usize;
        if f.quadrature.levels == 0 {
            return v.err("quad_levels must be at least 1");
        }
    }
    if let Some(v) = s.take("quad_tol") {
        f.quadrature.tol = v.positive()?;
    }
    if let Some(v) = s.take("lattice_dx") {
        f.lattice_dx = v.positive()?;
    }
    s.finish()?;
    Ok(f)
}

fn parse_function(mut s: Section) -> Result<FunctionSource> {
    if let Some(v) = s.take("file") {
        s.finish()?;
        return Ok(FunctionSource::File(PathBuf::from(v.text)));
    }
    let kind = match s.take("kind") {
        None => BumpKind::CosineBump,
        Some(v) => match v.text.as_str() {
            "cosine" => BumpKind::CosineBump,
            "gaussian" => BumpKind::TruncatedGaussian,
            other => return v.err(format!("unknown function kind '{other}' (cosine or gaussian)")),
        },
    };
    let c = s.require("center")?;
    let center = match c.list(false)?.as_slice() {
        &[t, x] => Point::new(t, x),
        _ => return c.err("center needs two numbers 't, x'"),
    };
    let half_width = s.require("half_width")?.positive()?;
    let amplitude = match s.take("amplitude") {
        Some(v) => v.number()?,
        None => 1.0,
    };
    s.finish()?;
    Ok(FunctionSource::Bump(BumpSpec { center, half_width, amplitude, kind }))
}

struct Names<'a> {
    known: &'a BTreeMap<String, usize>,
}

impl Names<'_> {
    fn one(&self, v: &Value) -> Result<String> {
        if self.known.contains_key(&v.text) {
            Ok(v.text.clone())
        } else {
            v.err(format!("unknown function '{}'", v.text))
        }
    }

    fn pair(&self, v: &Value) -> Result<(String, String)> {
        match v.names().as_slice() {
            [a, b] => {
                for n in [a, b] {
                    if !self.known.contains_key(n) {
                        return v.err(format!("unknown function '{n}'"));
                    }
                }
                Ok((a.clone(), b.clone()))
            }
            _ => v.err("expected two function names 'f1, f2'"),
        }
    }
}

fn parse_op(mut s: Section, names: &Names) -> Result<OpSpec> {
    let arg = s.arg.clone().unwrap_or_default();
    let index: u32 = match arg.parse() {
        Ok(i) => i,
        Err(_) => return s.err(format!("operation index '{arg}' is not a non-negative integer")),
    };
    if let Some(v) = s.take("condition") {
        return v.err("conditional operations are reserved; only locc_conditional is executable");
    }
    let agent = s.require("agent")?.text;
    let map = s.require("map")?;
    let interval = |s: &mut Section| -> Result<(f64, f64)> {
        let v = s.require("interval")?;
        match v.list(true)?.as_slice() {
            &[a, b] if a <= b => Ok((a, b)),
            &[_, _] => v.err("interval must satisfy a <= b"),
            _ => v.err("interval needs two numbers 'a, b'"),
        }
    };
    let spec = match map.text.as_str() {
        "kick" => {
            let field = names.one(&s.require("field")?)?;
            let v = s.require("strength")?;
            let strength = if v.text == "lambda" { Strength::Lambda } else { Strength::Value(v.number()?) };
            MapSpec::Kick { field, strength }
        }
        "kick_squared" => {
            let field = names.one(&s.require("field")?)?;
            let strength = match s.take("strength") {
                Some(v) if v.text == "lambda" => return v.err("only 'kick' accepts the strength 'lambda'"),
                Some(v) => v.number()?,
                None => 1.0,
            };
            MapSpec::KickSquared { field, strength }
        }
        "gaussian_measure" => MapSpec::GaussianMeasure {
            field: names.one(&s.require("field")?)?,
            sigma: s.require("sigma")?.positive()?,
        },
        "general_measure" => MapSpec::GeneralMeasure {
            field: names.one(&s.require("field")?)?,
            sigma: s.require("sigma")?.positive()?,
            profile_spacing: s.require("profile_spacing")?.positive()?,
        },
        "gaussian_measure_poly" => {
            let v = s.require("poly")?;
            let poly = parse_observable_at(&v.text, v.line, v.col)?;
            for n in poly.names() {
                if !names.known.contains_key(&n) {
                    return v.err(format!("unknown function '{n}'"));
                }
            }
            MapSpec::GaussianMeasurePoly { poly, sigma: s.require("sigma")?.positive()? }
        }
        "gaussian_measure_jordan" => {
            let (f1, f2) = names.pair(&s.require("fields")?)?;
            MapSpec::GaussianMeasureJordan { f1, f2, sigma: s.require("sigma")?.positive()? }
        }
        "selective_gaussian" => {
            let field = names.one(&s.require("field")?)?;
            let sigma = s.require("sigma")?.positive()?;
            let (a, b) = interval(&mut s)?;
            MapSpec::SelectiveGaussian { field, sigma, a, b }
        }
        "locc_conditional" => {
            let (f1, f2) = names.pair(&s.require("fields")?)?;
            let sigma = s.require("sigma")?.positive()?;
            let (a, b) = interval(&mut s)?;
            MapSpec::LoccConditional { f1, f2, sigma, a, b }
        }
        other => return map.err(format!("unknown map '{other}'")),
    };
    let region = s.take("region").map(|v| parse_regions(&v)).transpose()?;
    s.finish()?;
    Ok(OpSpec { index, agent, map: spec, region })
}

fn parse_readout(mut s: Section, names: &Names) -> Result<Readout> {
    let agent = s.take("agent").map_or_else(|| "Bob".to_string(), |v| v.text);
    let v = s.require("observable")?;
    let observable = parse_observable_at(&v.text, v.line, v.col)?;
    for n in observable.names() {
        if !names.known.contains_key(&n) {
            return v.err(format!("unknown function '{n}'"));
        }
    }
    let sweep = match (s.take("sweep"), s.take("lambdas")) {
        (Some(v), None) => Some(parse_sweep(&v)?),
        (None, Some(v)) => Some(Sweep::List(v.list(false)?)),
        (None, None) => None,
        (Some(_), Some(v)) => return v.err("give either 'sweep' or 'lambdas', not both"),
    };
    let sigma = s.take("sigma").map(|v| v.positive()).transpose()?.unwrap_or(1.0);
    let samples = s.take("samples").map(|v| v.integer()).transpose()?.map(|n| n as usize);
    let seed = s.take("seed").map(|v| v.integer()).transpose()?.unwrap_or(0);
    let region = s.take("region").map(|v| parse_regions(&v)).transpose()?;
    s.finish()?;
    Ok(Readout { agent, observable, region, sweep, sigma, samples, seed })
}

fn parse_sweep(v: &Value) -> Result<Sweep> {
    let parts: Vec<&str> = v.text.split(':').map(str::trim).collect();
    let nums: Option<Vec<f64>> = parts.iter().map(|p| parse_number(p, false)).collect();
    match nums.as_deref() {
        Some(&[start, stop, step]) if step > 0.0 && stop >= start => Ok(Sweep::Range { start, stop, step }),
        Some(&[_, _, _]) => v.err("sweep needs step > 0 and stop >= start"),
        _ => v.err(format!("expected 'start:stop:step', found '{}'", v.text)),
    }
}

/// Parses a sweep given as `start:stop:step`.
pub fn parse_sweep_arg(text: &str) -> Result<Sweep> {
    parse_sweep(&Value { text: text.trim().to_string(), line: 1, col: 1 })
}

/// Parses protocol text; relative file references resolve against `base_dir`.
pub fn parse_protocol(text: &str) -> Result<ProtocolSpec> {
    let sections = lex(text)?;
    let mut field: Option<(usize, FieldConfig)> = None;
    let mut functions = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut rest = Vec::new();
    for s in sections {
        match s.header.as_str() {
            "field" => {
                if let Some((first, _)) = field {
                    return s.err(format!("second [field] section (first on line {first})"));
                }
                let line = s.line;
                field = Some((line, parse_field(s)?));
            }
            "function" => {
                let name = s.arg.clone().unwrap_or_default();
                if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return s.err(format!("malformed function name '{name}'"));
                }
                if let Some(first) = seen.get(&name) {
                    return s.err(format!("function '{name}' defined on line {first} and again on line {}", s.line));
                }
                seen.insert(name.clone(), s.line);
                functions.push(FunctionDef { name, source: parse_function(s)? });
            }
            _ => rest.push(s),
        }
    }
    let names = Names { known: &seen };
    let mut ops: Vec<(usize, OpSpec)> = Vec::new();
    let mut readout: Option<(usize, Readout)> = None;
    for s in rest {
        let line = s.line;
        if s.header == "op" {
            let op = parse_op(s, &names)?;
            if let Some((first, _)) = ops.iter().find(|(_, o)| o.index == op.index) {
                return Err(Error::Parse {
                    line,
                    column: 1,
                    message: format!("operation {} defined on line {first} and again on line {line}", op.index),
                });
            }
            ops.push((line, op));
        } else {
            if let Some((first, _)) = readout {
                return Err(Error::Parse {
                    line,
                    column: 1,
                    message: format!("second [readout] section (first on line {first})"),
                });
            }
            readout = Some((line, parse_readout(s, &names)?));
        }
    }
    let Some((_, readout)) = readout else {
        return Err(Error::Parse { line: text.lines().count().max(1), column: 1, message: "missing [readout] section".into() });
    };
    let lambdas: Vec<usize> = ops.iter().filter(|(_, o)| o.is_alice()).map(|(l, _)| *l).collect();
    if lambdas.len() > 1 {
        return Err(Error::Parse {
            line: lambdas[1],
            column: 1,
            message: format!("only one operation may use 'lambda' (first on line {})", lambdas[0]),
        });
    }
    ops.sort_by_key(|(_, o)| o.index);
    Ok(ProtocolSpec {
        field: field.map(|(_, f)| f).unwrap_or_default(),
        functions,
        ops: ops.into_iter().map(|(_, o)| o).collect(),
        readout,
        base_dir: PathBuf::from("."),
    })
}

struct Floats<'a>(&'a [f64]);

impl fmt::Display for Floats<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn write_regions(f: &mut fmt::Formatter<'_>, rects: &[Rect]) -> fmt::Result {
    let parts: Vec<String> = rects.iter().map(|r| format!("{} {} {} {}", r.t_lo, r.t_hi, r.x_lo, r.x_hi)).collect();
    writeln!(f, "region = {}", parts.join("; "))
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.field;
        let QuadratureConfig { dx, levels, tol } = c.quadrature;
        writeln!(f, "[field]")?;
        writeln!(f, "mass = {}", c.mass)?;
        let backend = match c.backend {
            Backend::Quadrature => "quadrature",
            Backend::Lattice => "lattice",
        };
        writeln!(f, "backend = {backend}")?;
        writeln!(f, "quad_dx = {dx}\nquad_levels = {levels}\nquad_tol = {tol}\nlattice_dx = {}", c.lattice_dx)?;
        for d in &self.functions {
            writeln!(f, "\n[function {}]", d.name)?;
            match &d.source {
                FunctionSource::File(p) => writeln!(f, "file = {}", p.display())?,
                FunctionSource::Bump(b) => {
                    let kind = match b.kind {
                        BumpKind::CosineBump => "cosine",
                        BumpKind::TruncatedGaussian => "gaussian",
                    };
                    writeln!(f, "kind = {kind}")?;
                    writeln!(f, "center = {}", Floats(&[b.center.t, b.center.x]))?;
                    writeln!(f, "half_width = {}\namplitude = {}", b.half_width, b.amplitude)?;
                }
            }
        }
        for op in &self.ops {
            writeln!(f, "\n[op {}]\nagent = {}\nmap = {}", op.index, op.agent, op.map.name())?;
            match &op.map {
                MapSpec::Kick { field, strength } => {
                    writeln!(f, "field = {field}")?;
                    match strength {
                        Strength::Lambda => writeln!(f, "strength = lambda")?,
                        Strength::Value(v) => writeln!(f, "strength = {v}")?,
                    }
                }
                MapSpec::KickSquared { field, strength } => writeln!(f, "field = {field}\nstrength = {strength}")?,
                MapSpec::GaussianMeasure { field, sigma } => writeln!(f, "field = {field}\nsigma = {sigma}")?,
                MapSpec::GeneralMeasure { field, sigma, profile_spacing } => {
                    writeln!(f, "field = {field}\nsigma = {sigma}\nprofile_spacing = {profile_spacing}")?
                }
                MapSpec::GaussianMeasurePoly { poly, sigma } => writeln!(f, "poly = {poly}\nsigma = {sigma}")?,
                MapSpec::GaussianMeasureJordan { f1, f2, sigma } => writeln!(f, "fields = {f1}, {f2}\nsigma = {sigma}")?,
                MapSpec::SelectiveGaussian { field, sigma, a, b } => {
                    writeln!(f, "field = {field}\nsigma = {sigma}\ninterval = {}", Floats(&[*a, *b]))?
                }
                MapSpec::LoccConditional { f1, f2, sigma, a, b } => {
                    writeln!(f, "fields = {f1}, {f2}\nsigma = {sigma}\ninterval = {}", Floats(&[*a, *b]))?
                }
            }
            if let Some(r) = &op.region {
                write_regions(f, r)?;
            }
        }
        let r = &self.readout;
        writeln!(f, "\n[readout]\nagent = {}\nobservable = {}", r.agent, r.observable)?;
        match &r.sweep {
            Some(Sweep::Range { start, stop, step }) => writeln!(f, "sweep = {start}:{stop}:{step}")?,
            Some(Sweep::List(l)) => writeln!(f, "lambdas = {}", Floats(l))?,
            None => {}
        }
        writeln!(f, "sigma = {}", r.sigma)?;
        if let Some(n) = r.samples {
            writeln!(f, "samples = {n}")?;
        }
        writeln!(f, "seed = {}", r.seed)?;
        if let Some(reg) = &r.region {
            write_regions(f, reg)?;
        }
        Ok(())
    }
}
