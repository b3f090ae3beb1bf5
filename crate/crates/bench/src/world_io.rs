//! Line-oriented world format.
//!
//! ```text
//! # incransac-world v1
//! bounds -400 -100 400 100
//! mapped_region -400 -20 400 20
//! change_ratio 0.5
//! seed 7
//! 0 12.5 -3.25 12.5 -3.25
//! 1 -81 44.125 203.5 -7
//! ```
//!
//! Header keys come first, then one landmark per line as
//! `id x_prior y_prior x_true y_true`. Lines starting with `#` and blank
//! lines are ignored. Numbers use Rust's shortest round-trip formatting, so
//! a saved world reloads bit-identically.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use incransac::environment::EnvironmentError;
use incransac::{Landmark, Point2, Rect, World, WorldParams};
use thiserror::Error;

pub const WORLD_FORMAT_HEADER: &str = "# incransac-world v1";

#[derive(Debug, Error)]
pub enum WorldIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing header key `{0}`")]
    MissingHeader(&'static str),
    #[error(transparent)]
    World(#[from] EnvironmentError),
}

fn parse_err(line: usize, reason: impl Into<String>) -> WorldIoError {
    WorldIoError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn write_world<W: Write>(world: &World, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    let rect = |r: Rect| format!("{} {} {} {}", r.min.x, r.min.y, r.max.x, r.max.y);
    writeln!(out, "{WORLD_FORMAT_HEADER}")?;
    writeln!(out, "bounds {}", rect(world.bounds()))?;
    writeln!(out, "mapped_region {}", rect(world.mapped_region()))?;
    writeln!(out, "change_ratio {}", world.change_ratio())?;
    writeln!(out, "seed {}", world.seed())?;
    let mut line = String::new();
    for l in world.landmarks() {
        line.clear();
        let _ = writeln!(line, "{} {} {} {} {}", l.id, l.prior.x, l.prior.y, l.truth.x, l.truth.y);
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn world_to_string(world: &World) -> String {
    let mut buf = Vec::new();
    write_world(world, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("world text is ASCII")
}

pub fn read_world<R: BufRead>(input: R) -> Result<World, WorldIoError> {
    let mut bounds = None;
    let mut mapped = None;
    let mut change_ratio = None;
    let mut seed = None;
    let mut landmarks = Vec::new();

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let key = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        match key {
            "bounds" => bounds = Some(parse_rect(line_no, &rest)?),
            "mapped_region" => mapped = Some(parse_rect(line_no, &rest)?),
            "change_ratio" => change_ratio = Some(parse_one::<f64>(line_no, &rest)?),
            "seed" => seed = Some(parse_one::<u64>(line_no, &rest)?),
            _ => {
                let id: u32 = key
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("unknown header key or bad id `{key}`")))?;
                let v = parse_floats(line_no, &rest, 4)?;
                if id as usize != landmarks.len() {
                    return Err(parse_err(line_no, format!("expected id {}, found {id}", landmarks.len())));
                }
                landmarks.push(Landmark {
                    id,
                    prior: Point2::new(v[0], v[1]),
                    truth: Point2::new(v[2], v[3]),
                });
            }
        }
    }

    let params = WorldParams {
        bounds: bounds.ok_or(WorldIoError::MissingHeader("bounds"))?,
        mapped_region: mapped.ok_or(WorldIoError::MissingHeader("mapped_region"))?,
        landmark_count: landmarks.len(),
        change_ratio: change_ratio.ok_or(WorldIoError::MissingHeader("change_ratio"))?,
    };
    let seed = seed.ok_or(WorldIoError::MissingHeader("seed"))?;
    Ok(World::from_landmarks(params, seed, landmarks)?)
}

pub fn world_from_str(text: &str) -> Result<World, WorldIoError> {
    read_world(text.as_bytes())
}

fn parse_floats(line: usize, fields: &[&str], n: usize) -> Result<Vec<f64>, WorldIoError> {
    if fields.len() != n {
        return Err(parse_err(line, format!("expected {n} numbers, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad number `{f}`")))
        })
        .collect()
}

fn parse_rect(line: usize, fields: &[&str]) -> Result<Rect, WorldIoError> {
    let v = parse_floats(line, fields, 4)?;
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn parse_one<T: std::str::FromStr>(line: usize, fields: &[&str]) -> Result<T, WorldIoError> {
    match fields {
        [one] => one.parse().map_err(|_| parse_err(line, format!("bad value `{one}`"))),
        _ => Err(parse_err(line, "expected exactly one value")),
    }
}
