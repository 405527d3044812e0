//! Small textual formats shared by the subcommands.

use std::str::FromStr;

use coprime_scope::{Region, Window};
use num_rational::Ratio;

use crate::Failure;

fn bad(what: &str, s: &str) -> Failure {
    Failure::Param(format!("cannot parse {what} `{s}`"))
}

/// `"3"` or `"1,2,3"`.
pub fn point(s: &str) -> Result<Vec<i64>, Failure> {
    s.split(',').map(|t| t.trim().parse::<i64>().map_err(|_| bad("point", s))).collect()
}

/// `"2"`, `"3/2"`.
pub fn ratio(s: &str) -> Result<Ratio<i64>, Failure> {
    Ratio::from_str(s.trim()).map_err(|_| bad("rational", s))
}

/// `"LO:HI"` with scalar corners (a cube, needs `d`) or point corners.
pub fn corners(s: &str, d: Option<usize>) -> Result<(Vec<i64>, Vec<i64>), Failure> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| bad("box", s))?;
    let (mut lo, mut hi) = (point(lo)?, point(hi)?);
    if lo.len() == 1 && hi.len() == 1 {
        if let Some(d) = d {
            lo = vec![lo[0]; d];
            hi = vec![hi[0]; d];
        }
    }
    if lo.len() != hi.len() {
        return Err(bad("box", s));
    }
    if let Some(d) = d {
        if lo.len() != d {
            return Err(Failure::Param(format!("box `{s}` is not {d}-dimensional")));
        }
    }
    Ok((lo, hi))
}

/// A box (`--box LO:HI`) or a Euclidean ball (`--ball RADIUS [--center C]`).
pub fn region(boxed: Option<&str>, ball: Option<&str>, center: Option<&str>, d: Option<usize>) -> Result<Region, Failure> {
    match (boxed, ball) {
        (Some(b), None) => {
            let (lo, hi) = corners(b, d)?;
            Ok(Region::boxed(lo, hi)?)
        }
        (None, Some(r)) => {
            let c: Vec<Ratio<i64>> = match center {
                Some(c) => c.split(',').map(ratio).collect::<Result<_, _>>()?,
                None => vec![Ratio::from_integer(0); d.ok_or_else(|| Failure::Param("a ball needs --center or --d".into()))?],
            };
            Ok(Region::ball(c, ratio(r)?)?)
        }
        (None, None) => Err(Failure::Param("give a region with --box or --ball".into())),
        (Some(_), Some(_)) => Err(Failure::Param("--box and --ball are exclusive".into())),
    }
}

/// `"0,0;1,0"` or `"box:LO:HI"`.
pub fn window(s: &str, d: Option<usize>) -> Result<Window, Failure> {
    if let Some(rest) = s.strip_prefix("box:") {
        let (lo, hi) = corners(rest, d)?;
        return Ok(Window::box_window(&lo, &hi)?);
    }
    Ok(Window::from_str(s)?)
}
