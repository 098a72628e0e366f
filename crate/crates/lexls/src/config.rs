//! Flat `key=value` settings files.

use std::fmt;

use lexls_core::problems::{CartPoleSpec, RandomHlspSpec, TestHierarchySpec};
use lexls_core::shlsp::ShlspSettings;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey { line: usize, key: String },
    BadValue { line: usize, key: String, value: String },
    Malformed { line: usize, text: String },
    Invalid(String),
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key `{key}`"),
            ConfigError::BadValue { line, key, value } => write!(f, "line {line}: bad value `{value}` for key `{key}`"),
            ConfigError::Malformed { line, text } => write!(f, "line {line}: expected key=value, found `{text}`"),
            ConfigError::Invalid(msg) => write!(f, "invalid settings: {msg}"),
            ConfigError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Dimensions and grid of the nullspace benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub n_q: usize,
    pub n_gamma: usize,
    pub horizons: Vec<usize>,
    pub n_ua: Vec<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec { n_q: 22, n_gamma: 24, horizons: vec![5, 10, 15, 20, 25], n_ua: vec![0, 1] }
    }
}

/// Every tunable of a run, with the library defaults.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub solver: ShlspSettings,
    pub testfuncs: TestHierarchySpec,
    pub cartpole: CartPoleSpec,
    pub random: RandomHlspSpec,
    pub bench: BenchSpec,
}

fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() })
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|v| parse(line, key, v.trim())).collect()
}

impl Settings {
    /// Applies one override. Keys are the field names, with ADMM settings
    /// under `admm.` and problem parameters under the problem prefix.
    pub fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.solver;
        let a = &mut s.admm;
        let c = &mut self.cartpole;
        match key {
            "chi" => s.chi = parse(line, key, value)?,
            "beta" => s.beta = parse(line, key, value)?,
            "gamma" => s.gamma = parse(line, key, value)?,
            "h_floor" => s.h_floor = parse(line, key, value)?,
            "h_max" => s.h_max = parse(line, key, value)?,
            "h_best" => s.h_best = parse(line, key, value)?,
            "kappa" => s.kappa = parse(line, key, value)?,
            "delta" => s.delta = parse(line, key, value)?,
            "zeta" => s.zeta = parse(line, key, value)?,
            "eps_low" => s.eps_low = parse(line, key, value)?,
            "eps_high" => s.eps_high = parse(line, key, value)?,
            "eps_init" => s.eps_init = parse(line, key, value)?,
            "tr_init" => s.tr_init = parse(line, key, value)?,
            "tr_grow" => s.tr_grow = parse(line, key, value)?,
            "tr_shrink" => s.tr_shrink = parse(line, key, value)?,
            "tr_min" => s.tr_min = parse(line, key, value)?,
            "tr_max" => s.tr_max = parse(line, key, value)?,
            "max_outer" => s.max_outer = parse(line, key, value)?,
            "soi" => s.soi = parse(line, key, value)?,
            "cg_tol" => s.cg_tol = parse(line, key, value)?,
            "cg_max_iter" => s.cg_max_iter = parse(line, key, value)?,
            "admm.rho0" => a.rho0 = parse(line, key, value)?,
            "admm.sigma0" => a.sigma0 = parse(line, key, value)?,
            "admm.alpha" => a.alpha = parse(line, key, value)?,
            "admm.nu" => a.nu = parse(line, key, value)?,
            "admm.eta" => a.eta = parse(line, key, value)?,
            "admm.max_iter" => a.max_iter = parse(line, key, value)?,
            "admm.rho_min" => a.rho_min = parse(line, key, value)?,
            "admm.rho_max" => a.rho_max = parse(line, key, value)?,
            "admm.rho_interval" => a.rho_interval = parse(line, key, value)?,
            "admm.rho_trigger" => a.rho_trigger = parse(line, key, value)?,
            "admm.divergence_factor" => a.divergence_factor = parse(line, key, value)?,
            "admm.polish" => a.polish = parse(line, key, value)?,
            "admm.polish_rounds" => a.polish_rounds = parse(line, key, value)?,
            "admm.dense_cutoff" => a.dense_cutoff = parse(line, key, value)?,
            "testfuncs.offset" => self.testfuncs.offset = parse(line, key, value)?,
            "testfuncs.x0" => {
                let x0: Vec<f64> = parse_list(line, key, value)?;
                if x0.len() != self.testfuncs.x0.len() {
                    return Err(ConfigError::BadValue { line, key: key.into(), value: value.into() });
                }
                self.testfuncs.x0 = x0;
            }
            "cartpole.cart_mass" => c.cart_mass = parse(line, key, value)?,
            "cartpole.pole_mass" => c.pole_mass = parse(line, key, value)?,
            "cartpole.pole_length" => c.pole_length = parse(line, key, value)?,
            "cartpole.force_bound" => c.force_bound = parse(line, key, value)?,
            "cartpole.cart_bound" => c.cart_bound = parse(line, key, value)?,
            "cartpole.horizon" => c.horizon = parse(line, key, value)?,
            "cartpole.dt" => c.dt = parse(line, key, value)?,
            "cartpole.gravity" => c.gravity = parse(line, key, value)?,
            "cartpole.target_x" => c.target[0] = parse(line, key, value)?,
            "cartpole.target_y" => c.target[1] = parse(line, key, value)?,
            "cartpole.guess_force" => c.guess_force = parse(line, key, value)?,
            "cartpole.guess_stages" => c.guess_stages = parse(line, key, value)?,
            "random.n" => self.random.n = parse(line, key, value)?,
            "random.levels" => self.random.levels = parse(line, key, value)?,
            "random.rows_per_level" => self.random.rows_per_level = parse(line, key, value)?,
            "random.inequality_share" => self.random.inequality_share = parse(line, key, value)?,
            "bench.n_q" => self.bench.n_q = parse(line, key, value)?,
            "bench.n_gamma" => self.bench.n_gamma = parse(line, key, value)?,
            "bench.horizons" => self.bench.horizons = parse_list(line, key, value)?,
            "bench.n_ua" => self.bench.n_ua = parse_list(line, key, value)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    /// Applies a settings file. Blank lines and lines starting with `#` are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(ConfigError::Malformed { line, text: t.to_string() });
            };
            self.apply(line, k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let c = &self.cartpole;
        if c.horizon == 0 || !c.dt.is_finite() || c.dt <= 0.0 {
            return Err(ConfigError::Invalid("cartpole.horizon and cartpole.dt must be positive".into()));
        }
        let r = &self.random;
        if r.n == 0 || r.levels == 0 || r.rows_per_level == 0 {
            return Err(ConfigError::Invalid(
                "random.n, random.levels and random.rows_per_level must be positive".into(),
            ));
        }
        let b = &self.bench;
        if b.n_q == 0 || b.horizons.is_empty() || b.horizons.contains(&0) || b.n_ua.iter().any(|&u| u >= b.n_q) {
            return Err(ConfigError::Invalid("bench needs positive horizons and n_ua below n_q".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_comments() {
        let mut s = Settings::default();
        s.apply_text("# solver\nmax_outer = 42\n\nadmm.eta=1e-7\nbench.horizons=5, 10\n").unwrap();
        assert_eq!(s.solver.max_outer, 42);
        assert_eq!(s.solver.admm.eta, 1e-7);
        assert_eq!(s.bench.horizons, vec![5, 10]);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut s = Settings::default();
        let e = s.apply_text("chi=1e-6\nfoo.bar=3\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { line: 2, key: "foo.bar".into() });
        assert!(e.to_string().contains("foo.bar"));
    }

    #[test]
    fn bad_values_and_lines() {
        let mut s = Settings::default();
        assert!(matches!(s.apply_text("chi=abc"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(s.apply_text("chi"), Err(ConfigError::Malformed { .. })));
        assert!(matches!(s.apply_text("testfuncs.x0=1,2"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn validation_rejects_inconsistent_values() {
        let mut s = Settings::default();
        s.apply_text("beta=0.5\ngamma=0.6").unwrap();
        assert!(matches!(s.validate(), Err(ConfigError::Invalid(_))));
    }
}
