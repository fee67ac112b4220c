//! `key = value` configuration files. Blank lines and `#` comments are
//! ignored; unknown keys and repeated keys are errors.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::synth::SyntheticSpec;
use crate::error::{Error, Result};
use crate::patch::PatchConfig;
use crate::sparse::SrcConfig;
use crate::triplet::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub train: TrainConfig,
    /// Triplets drawn from probe patches to track generalization.
    pub heldout_triplets: usize,
    pub patch: PatchConfig,
    pub src: SrcConfig,
    pub synth: SyntheticSpec,
}

impl Default for Config {
    fn default() -> Self {
        let seed = 42;
        Config {
            seed,
            train: TrainConfig { seed, ..TrainConfig::default() },
            heldout_triplets: 256,
            patch: PatchConfig::default(),
            src: SrcConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| Error::Config { line, message: format!("{key}: cannot parse `{v}`: {e}") })
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config { line, message: format!("{key}: expected true or false, got `{v}`") }),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got `{body}`") })?;
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config { line, message: format!("{key} set twice") });
            }
            seen.push(key.to_owned());
            c.set(line, key, value)?;
        }
        c.train.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| e.at_path(path))
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        let p = &mut self.patch;
        let s = &mut self.src;
        let y = &mut self.synth;
        match key {
            "seed" => self.seed = num(line, key, v)?,
            "epochs" => t.epochs = num(line, key, v)?,
            "batch_size" => t.batch_size = num(line, key, v)?,
            "learning_rate" => t.learning_rate = num(line, key, v)?,
            "momentum" => t.momentum = num(line, key, v)?,
            "weight_decay" => t.weight_decay = num(line, key, v)?,
            "margin" => t.margin = num(line, key, v)?,
            "refresh_interval" => t.refresh_interval = num(line, key, v)?,
            "pool_size" => t.pool_size = if v == "auto" { None } else { Some(num(line, key, v)?) },
            "l2_normalize" => t.l2_normalize = flag(line, key, v)?,
            "heldout_triplets" => self.heldout_triplets = num(line, key, v)?,
            "bilateral_spatial_sigma" => p.filter.bilateral_spatial_sigma = num(line, key, v)?,
            "bilateral_range_sigma" => p.filter.bilateral_range_sigma = num(line, key, v)?,
            "bilateral_radius" => p.filter.bilateral_radius = num(line, key, v)?,
            "keypoint_threshold" => p.keypoints.threshold = num(line, key, v)?,
            "max_keypoints" => p.keypoints.max_keypoints = num(line, key, v)?,
            "filter_sizes" => {
                p.keypoints.filter_sizes = v.split(',').map(|f| num(line, key, f.trim())).collect::<Result<_>>()?;
            }
            "keypoint_border" => p.keypoints.border = num(line, key, v)?,
            "max_invalid_depth" => p.extract.max_invalid_depth = num(line, key, v)?,
            "atoms" => s.atoms = num(line, key, v)?,
            "lambda" => s.lasso.lambda = num(line, key, v)?,
            "lasso_tol" => s.lasso.tol = num(line, key, v)?,
            "lasso_max_iter" => s.lasso.max_iter = num(line, key, v)?,
            "weight_image" => s.weights.image = num(line, key, v)?,
            "weight_depth" => s.weights.depth = num(line, key, v)?,
            "identities" => y.identities = num(line, key, v)?,
            "samples_per_identity" => y.samples_per_identity = num(line, key, v)?,
            "gallery_per_identity" => y.gallery_per_identity = num(line, key, v)?,
            "noise_sigma" => y.noise_sigma = num(line, key, v)?,
            "brightness_jitter" => y.brightness_jitter = num(line, key, v)?,
            "max_shift" => y.max_shift = num(line, key, v)?,
            "depth_noise_sigma" => y.depth_noise_sigma = num(line, key, v)?,
            "hole_fraction" => y.hole_fraction = num(line, key, v)?,
            _ => return Err(Error::Config { line, message: format!("unknown key `{key}`") }),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in file order; parsing the
    /// rendered pairs reproduces the config.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (t, p, s, y) = (&self.train, &self.patch, &self.src, &self.synth);
        vec![
            ("seed", self.seed.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("momentum", t.momentum.to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("margin", t.margin.to_string()),
            ("refresh_interval", t.refresh_interval.to_string()),
            ("pool_size", t.pool_size.map_or_else(|| "auto".to_owned(), |n| n.to_string())),
            ("l2_normalize", t.l2_normalize.to_string()),
            ("heldout_triplets", self.heldout_triplets.to_string()),
            ("bilateral_spatial_sigma", p.filter.bilateral_spatial_sigma.to_string()),
            ("bilateral_range_sigma", p.filter.bilateral_range_sigma.to_string()),
            ("bilateral_radius", p.filter.bilateral_radius.to_string()),
            ("keypoint_threshold", p.keypoints.threshold.to_string()),
            ("max_keypoints", p.keypoints.max_keypoints.to_string()),
            ("filter_sizes", p.keypoints.filter_sizes.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",")),
            ("keypoint_border", p.keypoints.border.to_string()),
            ("max_invalid_depth", p.extract.max_invalid_depth.to_string()),
            ("atoms", s.atoms.to_string()),
            ("lambda", s.lasso.lambda.to_string()),
            ("lasso_tol", s.lasso.tol.to_string()),
            ("lasso_max_iter", s.lasso.max_iter.to_string()),
            ("weight_image", s.weights.image.to_string()),
            ("weight_depth", s.weights.depth.to_string()),
            ("identities", y.identities.to_string()),
            ("samples_per_identity", y.samples_per_identity.to_string()),
            ("gallery_per_identity", y.gallery_per_identity.to_string()),
            ("noise_sigma", y.noise_sigma.to_string()),
            ("brightness_jitter", y.brightness_jitter.to_string()),
            ("max_shift", y.max_shift.to_string()),
            ("depth_noise_sigma", y.depth_noise_sigma.to_string()),
            ("hole_fraction", y.hole_fraction.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The effective config as `# key = value` lines, for output headers.
    pub fn echo(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.synth.validate()?;
        let k = &self.patch.keypoints;
        if k.filter_sizes.len() < 3 || k.filter_sizes.iter().any(|&f| f < 3 || f % 6 != 3) {
            return Err(Error::invalid("filter_sizes needs at least 3 sizes of the form 6k + 3"));
        }
        if k.border < 10 {
            return Err(Error::invalid("keypoint_border below 10 leaves no room for a 20x20 patch"));
        }
        if !(0.0..=1.0).contains(&self.patch.extract.max_invalid_depth) {
            return Err(Error::invalid("max_invalid_depth must lie in [0, 1]"));
        }
        if self.src.atoms == 0 {
            return Err(Error::invalid("atoms must be at least 1"));
        }
        let l = &self.src.lasso;
        if !(l.lambda >= 0.0) || !(l.tol > 0.0) || l.max_iter == 0 {
            return Err(Error::invalid("lambda must be >= 0, lasso_tol > 0, lasso_max_iter >= 1"));
        }
        let w = &self.src.weights;
        if !(w.image >= 0.0 && w.depth >= 0.0 && w.image + w.depth > 0.0) {
            return Err(Error::invalid("fusion weights must be non-negative and not both zero"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse("# nothing\n\n").unwrap(), Config::default());
    }

    #[test]
    fn overrides_apply() {
        let c = Config::parse("seed = 7\nlearning_rate = 0.01 # faster\npool_size = 500\nl2_normalize = true\nfilter_sizes = 9, 15, 21, 27\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.train.learning_rate, 0.01);
        assert_eq!(c.train.pool_size, Some(500));
        assert!(c.train.l2_normalize);
        assert_eq!(c.patch.keypoints.filter_sizes, vec![9, 15, 21, 27]);
    }

    #[test]
    fn rendered_text_parses_back() {
        let mut c = Config::default().with_seed(99);
        c.src.lasso.lambda = 0.037;
        c.train.margin = 0.35;
        c.synth.hole_fraction = 0.01;
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        assert!(c.echo().lines().all(|l| l.starts_with("# ")));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("seed = 1\n\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        assert!(matches!(Config::parse("epochs = many\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(Config::parse("seed 4\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(Config::parse("seed = 1\nseed = 2\n"), Err(Error::Config { line: 2, .. })));
        assert!(Config::parse("filter_sizes = 9,10,21\n").is_err());
        assert!(Config::parse("weight_image = 0\nweight_depth = 0\n").is_err());
    }
}
