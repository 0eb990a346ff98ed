use std::f64::consts::PI;

use anyhow::{anyhow, bail, Result};
use crio_core::PauliAxis;

/// Decimal radians or a multiple of π such as `pi`, `-pi/2`, `3pi/4`,
/// `0.5pi`, `3*pi/8`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase().replace(['π'], "pi").replace(' ', "");
    if let Some(pos) = t.find("pi") {
        let (coef, rest) = t.split_at(pos);
        let rest = &rest[2..];
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            _ => coef.parse::<f64>().map_err(|_| anyhow!("bad angle `{s}`"))?,
        };
        let d = match rest {
            "" => 1.0,
            _ => rest
                .strip_prefix('/')
                .and_then(|x| x.parse::<f64>().ok())
                .filter(|x| *x != 0.0)
                .ok_or_else(|| anyhow!("bad angle `{s}`"))?,
        };
        return Ok(c * PI / d);
    }
    let v: f64 = t.parse().map_err(|_| anyhow!("bad angle `{s}`"))?;
    if !v.is_finite() {
        bail!("bad angle `{s}`");
    }
    Ok(v)
}

/// `x`, `y`, `z` or three comma-separated components of a unit vector.
pub fn parse_axis(s: &str) -> Result<PauliAxis> {
    match s.trim().to_ascii_lowercase().as_str() {
        "x" => return Ok(PauliAxis::X),
        "y" => return Ok(PauliAxis::Y),
        "z" => return Ok(PauliAxis::Z),
        _ => {}
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow!("bad axis `{s}`, expected x|y|z or nx,ny,nz"))?;
    match parts.as_slice() {
        [x, y, z] => Ok(PauliAxis::new(*x, *y, *z)?),
        _ => bail!("bad axis `{s}`, expected three components"),
    }
}

/// Comma-separated group indices; `none` or empty for no groups.
pub fn parse_groups(s: &str) -> Result<Vec<usize>> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| anyhow!("bad group list `{s}`")))
        .collect()
}
