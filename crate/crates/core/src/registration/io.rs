//! Text interchange for correspondences and homographies.
//!
//! Correspondences are one match per line, `x y x̃ ỹ` in subpixel units.
//! Homographies are nine numbers in row-major order, whitespace separated.
//! Blank lines and `#` comments are skipped. Numbers are printed with
//! Rust's shortest round-trip formatting, so write-then-parse is exact.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::registration::{Correspondence, Homography};

fn parse_numbers(line: &str, context: &'static str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| Error::Parse {
                context,
                message: format!("bad number {tok:?}: {e}"),
            })
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Parses `x y x̃ ỹ` lines into correspondences.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for line in content_lines(text) {
        let nums = parse_numbers(line, "correspondence file")?;
        if nums.len() != 4 {
            return Err(Error::Parse {
                context: "correspondence file",
                message: format!("expected 4 numbers per line, got {}", nums.len()),
            });
        }
        out.push(Correspondence {
            source: (nums[0], nums[1]),
            target: (nums[2], nums[3]),
        });
    }
    Ok(out)
}

pub fn format_correspondences(corrs: &[Correspondence]) -> String {
    let mut s = String::new();
    for c in corrs {
        writeln!(s, "{} {} {} {}", c.source.0, c.source.1, c.target.0, c.target.1)
            .expect("writing to string cannot fail");
    }
    s
}

/// Parses nine whitespace-separated numbers (any line structure) into a
/// homography, row-major.
pub fn parse_homography(text: &str) -> Result<Homography> {
    let mut nums = Vec::new();
    for line in content_lines(text) {
        nums.extend(parse_numbers(line, "homography file")?);
    }
    if nums.len() != 9 {
        return Err(Error::Parse {
            context: "homography file",
            message: format!("expected 9 numbers, got {}", nums.len()),
        });
    }
    let mut vals = [0.0; 9];
    vals.copy_from_slice(&nums);
    Homography::from_row_major(&vals)
}

/// Formats a homography as three lines of three numbers, row-major.
pub fn format_homography(h: &Homography) -> String {
    let v = h.to_row_major();
    let mut s = String::new();
    for r in 0..3 {
        writeln!(s, "{} {} {}", v[3 * r], v[3 * r + 1], v[3 * r + 2])
            .expect("writing to string cannot fail");
    }
    s
}
