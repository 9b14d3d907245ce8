//! Argument parsing helpers shared by the `fusched` binary.

use fusched_core::dag::TaskType;
use fusched_core::metrics::{Metric, ObjectiveTerm};

/// Parses `metric[:weight[:priority]]` terms separated by commas.
pub fn parse_metrics(s: &str) -> Result<Vec<ObjectiveTerm>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let mut parts = item.split(':');
        let name = parts.next().unwrap_or_default();
        let metric = Metric::parse(name).ok_or_else(|| format!("unknown metric `{name}`"))?;
        let mut term = ObjectiveTerm::new(metric);
        if let Some(w) = parts.next() {
            term.weight = w.parse().map_err(|_| format!("bad weight `{w}` in `{item}`"))?;
            if !term.weight.is_finite() || term.weight < 0.0 {
                return Err(format!("weight in `{item}` must be finite and non-negative"));
            }
        }
        if let Some(p) = parts.next() {
            term.priority = p.parse().map_err(|_| format!("bad priority `{p}` in `{item}`"))?;
        }
        if parts.next().is_some() {
            return Err(format!("too many fields in `{item}`"));
        }
        out.push(term);
    }
    if out.is_empty() {
        return Err("no metric given".into());
    }
    Ok(out)
}

/// Parses a comma separated list of fusion task types.
pub fn parse_types(s: &str) -> Result<Vec<TaskType>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match TaskType::parse(t) {
            Some(ty) if ty.is_fusion() => Ok(ty),
            _ => Err(format!("`{t}` is not a fusion type")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_terms() {
        let t = parse_metrics("mrt, mtd:2,paoi:0.5:3").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!((t[0].metric, t[0].weight, t[0].priority), (Metric::Mrt, 1.0, 1));
        assert_eq!((t[1].metric, t[1].weight), (Metric::Mtd, 2.0));
        assert_eq!((t[2].metric, t[2].weight, t[2].priority), (Metric::Paoi, 0.5, 3));
    }

    #[test]
    fn metric_errors() {
        assert!(parse_metrics("").is_err());
        assert!(parse_metrics("speed").is_err());
        assert!(parse_metrics("mrt:-1").is_err());
        assert!(parse_metrics("mrt:1:2:3").is_err());
    }

    #[test]
    fn fusion_types() {
        assert_eq!(parse_types("w-fusion,i-fus").unwrap(), [TaskType::WFusion, TaskType::IFusion]);
        assert!(parse_types("sensor").is_err());
    }
}
