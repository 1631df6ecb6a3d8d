//! Frequency grid specifications.
//!
//! A spec is a comma-separated list of items. Each item is a single value,
//! an inclusive range `start:stop:step`, or a log-spaced range
//! `log:start:stop:count` with `0 < start < stop`.

use trillt::{Error, Result};

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for item in spec.split(',').map(str::trim) {
        if item.is_empty() {
            return bad(spec, "empty item");
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => grid.push(number(v)?),
            ["log", a, b, count] => {
                let (a, b) = (number(a)?, number(b)?);
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::Parameter(format!("bad point count '{count}' in '{item}'")))?;
                if !(a > 0.0 && b > a) || count < 2 {
                    return bad(item, "log ranges need 0 < start < stop and at least 2 points");
                }
                let (la, lb) = (a.ln(), b.ln());
                for i in 0..count {
                    let t = if i + 1 == count {
                        b
                    } else {
                        (la + (lb - la) * i as f64 / (count - 1) as f64).exp()
                    };
                    grid.push(t);
                }
            }
            [a, b, step] => {
                let (a, b, step) = (number(a)?, number(b)?, number(step)?);
                if !(step > 0.0) || b < a {
                    return bad(item, "ranges need start <= stop and a positive step");
                }
                let steps = ((b - a) / step + 1e-9).floor() as u64;
                if steps > 10_000_000 {
                    return bad(item, "too many points");
                }
                grid.extend((0..=steps).map(|i| a + i as f64 * step));
            }
            _ => return bad(item, "expected 'x', 'a:b:step' or 'log:a:b:count'"),
        }
    }
    Ok(grid)
}

fn number(s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parameter(format!("'{s}' is not a finite number"))),
    }
}

fn bad<T>(item: &str, why: &str) -> Result<T> {
    Err(Error::Parameter(format!("invalid grid '{item}': {why}")))
}
