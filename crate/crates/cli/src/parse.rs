//! Flag-value parsers shared by the binary and its tests.

/// Parse a k specification: a single value (`5`), a comma list (`2,3,5`),
/// or an inclusive range (`2..8`).
pub fn parse_k_values(spec: &str) -> Result<Vec<usize>, String> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| format!("invalid k range start {lo:?}"))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| format!("invalid k range end {hi:?}"))?;
        if lo > hi {
            return Err(format!("empty k range {spec:?}"));
        }
        return Ok((lo..=hi).collect());
    }
    let values: Result<Vec<usize>, _> = spec
        .split(',')
        .map(|part| part.trim().parse::<usize>())
        .collect();
    let values = values.map_err(|_| format!("invalid k list {spec:?}"))?;
    if values.is_empty() {
        return Err("no k values supplied".into());
    }
    Ok(values)
}

/// Parse a comma-separated fraction list such as `0.1,0.25,1.0`.
pub fn parse_fractions(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid fraction {part:?}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_specs() {
        assert_eq!(parse_k_values("5").unwrap(), vec![5]);
        assert_eq!(parse_k_values("2,3,5").unwrap(), vec![2, 3, 5]);
        assert_eq!(parse_k_values("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert!(parse_k_values("5..2").is_err());
        assert!(parse_k_values("two").is_err());
    }

    #[test]
    fn fraction_lists() {
        assert_eq!(parse_fractions("0.1,0.25,1.0").unwrap(), vec![0.1, 0.25, 1.0]);
        assert!(parse_fractions("0.1,x").is_err());
    }
}
