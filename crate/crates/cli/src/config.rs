//! Experiment configuration: `key = value` files, flag overrides, and the
//! typed, fully resolved form every command runs from.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use taylor_gmrf::spectrum::select_order;
use taylor_gmrf::{
    Boundary, CovarianceKind, FactorOptions, LatticeGrid64, MaternParams64, Ordering, PositiveInit,
    QuadratureSettings64, SymbolMode, UpdateOrder,
};

use crate::error::CliError;

/// Every key a configuration file or flag may set.
pub const KEYS: &[&str] = &[
    "alpha",
    "kappa",
    "sigma2",
    "d",
    "order",
    "j",
    "h",
    "n",
    "side",
    "boundary",
    "mode",
    "target",
    "kinds",
    "lags",
    "orders",
    "steps",
    "sides",
    "factors",
    "seed",
    "count",
    "ordering",
    "positive_init",
    "update_order",
    "form",
    "rel_tol",
    "abs_tol",
    "lattice_points",
    "output",
];

/// Raw `key → value` strings.
pub type RawConfig = BTreeMap<String, String>;

fn normalize_key(key: &str) -> Result<String, CliError> {
    let k = key.trim().replace('-', "_");
    let k = match k.as_str() {
        "K" | "k" => "order".to_string(),
        "J" => "j".to_string(),
        _ => k,
    };
    if KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(CliError::Config(format!("unknown key `{key}`")))
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<RawConfig, CliError> {
    let mut out = RawConfig::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.insert(normalize_key(key)?, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Applies flag values on top of file values. Setting one of `order`/`j`
/// by flag drops the other from the file so the two never conflict.
pub fn merge(mut file: RawConfig, flags: &[(&str, Option<String>)]) -> Result<RawConfig, CliError> {
    for (key, value) in flags {
        if let Some(v) = value {
            let key = normalize_key(key)?;
            match key.as_str() {
                "order" => {
                    file.remove("j");
                }
                "j" => {
                    file.remove("order");
                }
                _ => {}
            }
            file.insert(key, v.clone());
        }
    }
    Ok(file)
}

/// Commands differ only in a few defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Coeffs,
    Covariance,
    Assemble,
    Factor,
    Sample,
    Convergence,
    ErrorVsOrder,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Coeffs => "coeffs",
            CommandKind::Covariance => "covariance",
            CommandKind::Assemble => "assemble",
            CommandKind::Factor => "factor",
            CommandKind::Sample => "sample",
            CommandKind::Convergence => "convergence",
            CommandKind::ErrorVsOrder => "error-vs-order",
        }
    }

    fn default_boundary(&self) -> &'static str {
        match self {
            // factorizing an extended 201² grid needs several GB
            CommandKind::Assemble | CommandKind::Factor | CommandKind::Sample => "periodic",
            _ => "periodic_extended(2)",
        }
    }

    fn default_lags(&self) -> &'static str {
        match self {
            CommandKind::Convergence => "0,1",
            _ => "0:5:0.1",
        }
    }
}

/// Threshold on the computational grid size above which `auto` picks the
/// direct envelope factorization for the positive part.
pub const DIRECT_INIT_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorForm {
    Plain,
    Unit,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub params: MaternParams64,
    pub order: usize,
    pub depth: Option<usize>,
    pub h: f64,
    pub n: Vec<usize>,
    pub boundary: Boundary,
    pub mode: SymbolMode,
    pub target: CovarianceKind,
    pub kinds: Vec<CovarianceKind>,
    pub lags: Vec<f64>,
    pub orders: Vec<usize>,
    pub steps: Vec<f64>,
    pub sides: Option<Vec<f64>>,
    pub factors: Option<Vec<usize>>,
    pub seed: u64,
    pub count: usize,
    pub factor_options: FactorOptions,
    pub form: FactorForm,
    pub quadrature: QuadratureSettings64,
    pub output: Option<String>,
    /// Every resolved key with its final value, for output headers.
    pub resolved: RawConfig,
}

pub fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let v = match t {
        "pi" | "π" => std::f64::consts::PI,
        _ => t
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("{key}: `{s}` is not a number")))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key}: `{s}` is not finite")))
    }
}

fn parse_int<I: FromStr>(key: &str, s: &str) -> Result<I, CliError> {
    s.trim()
        .parse::<I>()
        .map_err(|_| CliError::Config(format!("{key}: `{s}` is not a non-negative integer")))
}

fn parse_with<V: FromStr>(key: &str, s: &str) -> Result<V, CliError>
where
    V::Err: std::fmt::Display,
{
    s.trim()
        .parse::<V>()
        .map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

/// `start:stop:step` (inclusive) or a comma list.
pub fn parse_lags(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b, step) = (parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?);
        if step <= 0.0 || b < a {
            return Err(CliError::Config(format!("{key}: need start ≤ stop and step > 0")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        // snap to 12 decimals so 3·0.1 prints as 0.3
        return Ok((0..=count)
            .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    let out: Vec<f64> = list(s).map(|p| parse_f64(key, p)).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(out)
}

/// `first:last` (inclusive) or a comma list.
pub fn parse_orders(key: &str, s: &str) -> Result<Vec<usize>, CliError> {
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (usize, usize) = (parse_int(key, a)?, parse_int(key, b)?);
        if b < a {
            return Err(CliError::Config(format!("{key}: empty range")));
        }
        return Ok((a..=b).collect());
    }
    let out: Vec<usize> = list(s).map(|p| parse_int(key, p)).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn resolve(command: CommandKind, raw: &RawConfig) -> Result<Self, CliError> {
        let resolved = RefCell::new(RawConfig::new());
        let get = |key: &str, default: Option<&str>| -> Option<String> {
            let v = raw.get(key).cloned().or(default.map(str::to_string));
            if let Some(v) = &v {
                resolved.borrow_mut().insert(key.to_string(), v.clone());
            }
            v
        };

        let alpha = parse_f64("alpha", &get("alpha", Some("3.141592653589793")).unwrap())?;
        let kappa = parse_f64("kappa", &get("kappa", Some("1")).unwrap())?;
        let sigma2 = parse_f64("sigma2", &get("sigma2", Some("1")).unwrap())?;
        let d: usize = parse_int("d", &get("d", Some("2")).unwrap())?;
        let params = MaternParams64::new(alpha, kappa, sigma2, d)?;

        let depth = get("j", None).map(|s| parse_int::<usize>("j", &s)).transpose()?;
        let order = match (raw.get("order"), depth) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("set either order (K) or j, not both".into()));
            }
            (None, Some(j)) => {
                let k = select_order(&params, j)?;
                resolved.borrow_mut().insert("order".into(), k.to_string());
                k
            }
            _ => parse_int("order", &get("order", Some("4")).unwrap())?,
        };

        let h = parse_f64("h", &get("h", Some("0.1")).unwrap())?;
        if h <= 0.0 {
            return Err(CliError::Config("h must be positive".into()));
        }
        let n: Vec<usize> = match (raw.get("n"), raw.get("side")) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("set either n or side, not both".into()));
            }
            (None, Some(_)) => {
                let side = parse_f64("side", &get("side", None).unwrap())?;
                if side <= 0.0 {
                    return Err(CliError::Config("side must be positive".into()));
                }
                let points = (side / h).round() as usize + 1;
                resolved.borrow_mut().insert("n".into(), points.to_string());
                vec![points; d]
            }
            _ => {
                let v: Vec<usize> = list(&get("n", Some("201")).unwrap())
                    .map(|p| parse_int("n", p))
                    .collect::<Result<_, _>>()?;
                match v.len() {
                    1 => vec![v[0]; d],
                    len if len == d => v,
                    len => {
                        return Err(CliError::Config(format!("n: {len} extents given for d = {d}")));
                    }
                }
            }
        };
        let boundary: Boundary = parse_with("boundary", &get("boundary", Some(command.default_boundary())).unwrap())?;
        let mode: SymbolMode = parse_with("mode", &get("mode", Some(SymbolMode::default_for(d).as_str())).unwrap())?;
        let target: CovarianceKind = parse_with("target", &get("target", Some("exact")).unwrap())?;
        if !matches!(target, CovarianceKind::Exact | CovarianceKind::BandLimited) {
            return Err(CliError::Config("target must be exact or band_limited".into()));
        }
        let kinds: Vec<CovarianceKind> = list(&get("kinds", Some("exact,band_limited,taylor,discrete")).unwrap())
            .map(|p| parse_with("kinds", p))
            .collect::<Result<_, _>>()?;
        let lags = parse_lags("lags", &get("lags", Some(command.default_lags())).unwrap())?;
        if lags.iter().any(|&x| x < 0.0) {
            return Err(CliError::Config("lags must be non-negative".into()));
        }
        let orders = parse_orders("orders", &get("orders", Some("1:8")).unwrap())?;
        let steps = parse_lags("steps", &get("steps", Some("0.4,0.2,0.1,0.05")).unwrap())?;
        if steps.iter().any(|&x| x <= 0.0) {
            return Err(CliError::Config("steps must be positive".into()));
        }
        let sides = get("sides", None).map(|s| parse_lags("sides", &s)).transpose()?;
        let factors = get("factors", None).map(|s| parse_orders("factors", &s)).transpose()?;
        let seed: u64 = parse_int("seed", &get("seed", Some("1")).unwrap())?;
        let count: usize = parse_int("count", &get("count", Some("1")).unwrap())?;

        let computational: usize = n.iter().map(|&p| p * boundary.factor()).product();
        let positive_init = match get("positive_init", Some("auto")).unwrap().as_str() {
            "auto" if computational <= DIRECT_INIT_THRESHOLD => PositiveInit::RankOneUpdates,
            "auto" => PositiveInit::Direct,
            other => parse_with("positive_init", other)?,
        };
        let ordering = match get("ordering", Some("auto")).unwrap().as_str() {
            "auto" => Ordering::Folded,
            other => parse_with("ordering", other)?,
        };
        let update_order: UpdateOrder = parse_with("update_order", &get("update_order", Some("positives_first")).unwrap())?;
        let factor_options = FactorOptions {
            ordering,
            positive_init,
            update_order,
            ..FactorOptions::default()
        };
        let form = match get("form", Some("plain")).unwrap().as_str() {
            "plain" => FactorForm::Plain,
            "unit" | "unit_diagonal" | "ldl" => FactorForm::Unit,
            other => return Err(CliError::Config(format!("form: `{other}` is not plain or unit"))),
        };

        let mut quadrature = QuadratureSettings64::default();
        if let Some(v) = get("rel_tol", None) {
            quadrature.rel_tol = parse_f64("rel_tol", &v)?;
        }
        if let Some(v) = get("abs_tol", None) {
            quadrature.abs_tol = parse_f64("abs_tol", &v)?;
        }
        if let Some(v) = get("lattice_points", None) {
            quadrature.lattice_points = Some(parse_int("lattice_points", &v)?);
        }
        // where the data goes is not part of it: same seed, same file
        let output = raw.get("output").cloned().filter(|s| s != "-");

        // record the effective choices rather than `auto`
        let mut resolved = resolved.into_inner();
        resolved.insert("positive_init".into(), format!("{positive_init}"));
        resolved.insert("ordering".into(), format!("{ordering}"));
        resolved.insert(
            "n".into(),
            n.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );

        Ok(Self {
            command,
            params,
            order,
            depth,
            h,
            n,
            boundary,
            mode,
            target,
            kinds,
            lags,
            orders,
            steps,
            sides,
            factors,
            seed,
            count,
            factor_options,
            form,
            quadrature,
            output,
            resolved,
        })
    }

    pub fn grid(&self) -> Result<LatticeGrid64, CliError> {
        Ok(LatticeGrid64::new(self.h, self.n.clone(), self.boundary)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> RawConfig {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\nalpha = 1.5  # smoothness\n\nK=4\n";
        assert_eq!(parse_config_text(text).unwrap(), raw(&[("alpha", "1.5"), ("order", "4")]));
    }

    #[test]
    fn unknown_keys_and_malformed_lines_are_rejected() {
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("alpha 1.5").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = raw(&[("alpha", "1.5"), ("order", "4")]);
        let merged = merge(file, &[("alpha", Some("2.5".into())), ("J", Some("1".into())), ("h", None)]).unwrap();
        assert_eq!(merged, raw(&[("alpha", "2.5"), ("j", "1")]));
    }

    #[test]
    fn depth_selects_the_order() {
        let c = ExperimentConfig::resolve(CommandKind::Coeffs, &raw(&[("alpha", "1.5"), ("d", "1"), ("j", "1")])).unwrap();
        assert_eq!(c.order, 4);
        assert_eq!(c.resolved["order"], "4");
    }

    #[test]
    fn defaults_follow_the_two_dimensional_experiment() {
        let c = ExperimentConfig::resolve(CommandKind::ErrorVsOrder, &RawConfig::new()).unwrap();
        assert_eq!(c.params.d(), 2);
        assert_eq!(c.n, vec![201, 201]);
        assert_eq!(c.boundary, Boundary::PeriodicExtended(2));
        assert_eq!(c.mode, SymbolMode::LaplacianPower);
        assert_eq!(c.orders, (1..=8).collect::<Vec<_>>());
        assert_eq!(c.factor_options.positive_init, PositiveInit::Direct);
    }

    #[test]
    fn side_sets_the_point_count() {
        let c = ExperimentConfig::resolve(CommandKind::Sample, &raw(&[("d", "1"), ("side", "3.1")])).unwrap();
        assert_eq!(c.n, vec![32]);
        assert_eq!(c.factor_options.positive_init, PositiveInit::RankOneUpdates);
    }

    #[test]
    fn ranges_expand_inclusively() {
        assert_eq!(parse_lags("lags", "0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_orders("orders", "2:4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_orders("orders", "1, 3").unwrap(), vec![1, 3]);
    }

    #[test]
    fn bad_values_are_configuration_errors() {
        for pairs in [
            vec![("alpha", "x")],
            vec![("h", "-1")],
            vec![("order", "4"), ("j", "1")],
            vec![("mode", "diagonal")],
            vec![("target", "taylor")],
        ] {
            let err = ExperimentConfig::resolve(CommandKind::Covariance, &raw(&pairs)).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{pairs:?}");
        }
    }
}
