//! Parsers for the structured command-line flag values.

use anyhow::{anyhow, bail, Result};
use panorpca::evalsim::{CameraMotion, ObjectShape, ThresholdMode};

/// Low-rank proximal step choice as given on the command line. The
/// default threshold for plain singular value thresholding depends on the
/// stack shape, so it stays symbolic until the data is loaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowRankArg {
    OptShrink,
    SvtDefault,
    Svt(f64),
}

pub fn parse_motion(s: &str) -> Result<CameraMotion> {
    if s == "static" {
        return Ok(CameraMotion::Static);
    }
    if let Some(rest) = s.strip_prefix("pan:") {
        let (dx, dy) = parse_pair_i64(rest)?;
        return Ok(CameraMotion::Pan { dx, dy });
    }
    bail!("expected `static` or `pan:DX,DY`, got `{s}`")
}

pub fn parse_shape(s: &str) -> Result<ObjectShape> {
    if let Some(rest) = s.strip_prefix("square:") {
        let side = rest
            .parse::<usize>()
            .map_err(|_| anyhow!("bad square side `{rest}`"))?;
        return Ok(ObjectShape::Square { side });
    }
    if let Some(rest) = s.strip_prefix("disc:") {
        let radius = rest
            .parse::<usize>()
            .map_err(|_| anyhow!("bad disc radius `{rest}`"))?;
        return Ok(ObjectShape::Disc { radius });
    }
    bail!("expected `square:SIDE` or `disc:RADIUS`, got `{s}`")
}

pub fn parse_threshold(s: &str) -> Result<ThresholdMode> {
    if s == "otsu" {
        return Ok(ThresholdMode::Otsu);
    }
    if let Some(rest) = s.strip_prefix("fixed:") {
        let v = rest
            .parse::<f64>()
            .map_err(|_| anyhow!("bad threshold value `{rest}`"))?;
        return Ok(ThresholdMode::Fixed(v));
    }
    bail!("expected `otsu` or `fixed:VALUE`, got `{s}`")
}

pub fn parse_low_rank(s: &str) -> Result<LowRankArg> {
    match s {
        "optshrink" => Ok(LowRankArg::OptShrink),
        "svt" => Ok(LowRankArg::SvtDefault),
        _ => {
            if let Some(rest) = s.strip_prefix("svt:") {
                let lambda = rest
                    .parse::<f64>()
                    .map_err(|_| anyhow!("bad threshold `{rest}`"))?;
                return Ok(LowRankArg::Svt(lambda));
            }
            bail!("expected `optshrink`, `svt`, or `svt:LAMBDA`, got `{s}`")
        }
    }
}

pub fn parse_pair_f64(s: &str) -> Result<(f64, f64)> {
    let (a, b) = split_pair(s)?;
    Ok((
        a.parse::<f64>().map_err(|_| anyhow!("bad number `{a}`"))?,
        b.parse::<f64>().map_err(|_| anyhow!("bad number `{b}`"))?,
    ))
}

pub fn parse_pair_i64(s: &str) -> Result<(i64, i64)> {
    let (a, b) = split_pair(s)?;
    Ok((
        a.parse::<i64>().map_err(|_| anyhow!("bad integer `{a}`"))?,
        b.parse::<i64>().map_err(|_| anyhow!("bad integer `{b}`"))?,
    ))
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    s.split_once(',')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| anyhow!("expected `A,B`, got `{s}`"))
}
