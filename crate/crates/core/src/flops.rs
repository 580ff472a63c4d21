//! Nominal FLOP accounting: `C(N, D) = xi * N * D` and architecture presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MACs per weight-sharing pair of multivector channels (16 x 16 components).
pub const MV_PAIR_MACS: f64 = 256.0;
/// Free parameters of an equivariant multivector-to-multivector map.
pub const MV_PAIR_PARAMS: f64 = 9.0;

/// Named FLOPs-per-parameter-token constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPreset {
    Baseline,
    EquivariantMixed,
    PureMultivector,
}

impl XiPreset {
    pub const ALL: [XiPreset; 3] = [XiPreset::Baseline, XiPreset::EquivariantMixed, XiPreset::PureMultivector];

    pub fn value(self) -> f64 {
        match self {
            XiPreset::Baseline => 6.0,
            // Stored as a constant: the channel mix behind it is not published.
            XiPreset::EquivariantMixed => 61.2,
            XiPreset::PureMultivector => 6.0 * MV_PAIR_MACS / MV_PAIR_PARAMS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            XiPreset::Baseline => "baseline",
            XiPreset::EquivariantMixed => "equivariant_mixed",
            XiPreset::PureMultivector => "pure_multivector",
        }
    }
}

impl fmt::Display for XiPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XiPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(XiPreset::Baseline),
            "equivariant_mixed" | "equivariant" => Ok(XiPreset::EquivariantMixed),
            "pure_multivector" => Ok(XiPreset::PureMultivector),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

pub fn xi_preset(name: &str) -> Result<f64> {
    name.parse::<XiPreset>().map(XiPreset::value)
}

/// Parses either a preset name or a positive number.
pub fn parse_xi(s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(_) => Err(Error::InvalidArgument(format!("xi must be positive, got `{s}`"))),
        Err(_) => xi_preset(s),
    }
}

/// One kind of channel pairing in a network's linear layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, u64)", into = "(f64, f64, u64)")]
pub struct LayerPair {
    pub macs_per_pair: f64,
    pub params_per_pair: f64,
    pub pair_count: u64,
}

impl LayerPair {
    pub fn scalar(pair_count: u64) -> Self {
        LayerPair { macs_per_pair: 1.0, params_per_pair: 1.0, pair_count }
    }

    pub fn multivector(pair_count: u64) -> Self {
        LayerPair { macs_per_pair: MV_PAIR_MACS, params_per_pair: MV_PAIR_PARAMS, pair_count }
    }
}

impl From<(f64, f64, u64)> for LayerPair {
    fn from((macs_per_pair, params_per_pair, pair_count): (f64, f64, u64)) -> Self {
        LayerPair { macs_per_pair, params_per_pair, pair_count }
    }
}

impl From<LayerPair> for (f64, f64, u64) {
    fn from(p: LayerPair) -> Self {
        (p.macs_per_pair, p.params_per_pair, p.pair_count)
    }
}

/// Linear-layer composition of a network. Serializes as `[[macs, params, count], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerMix(pub Vec<LayerPair>);

/// FLOPs per parameter per token of a mixed scalar/multivector network:
/// `6 * sum(count * macs) / sum(count * params)`.
pub fn xi_from_mix(mix: &LayerMix) -> Result<f64> {
    if mix.0.is_empty() {
        return Err(Error::InvalidArgument("layer mix is empty".into()));
    }
    let mut macs = 0.0;
    let mut params = 0.0;
    for p in &mix.0 {
        if !(p.macs_per_pair > 0.0 && p.params_per_pair > 0.0 && p.pair_count > 0) {
            return Err(Error::InvalidArgument(format!("layer mix entry {p:?} is not positive")));
        }
        macs += p.pair_count as f64 * p.macs_per_pair;
        params += p.pair_count as f64 * p.params_per_pair;
    }
    if params <= 0.0 {
        return Err(Error::InvalidArgument("layer mix has zero total parameters".into()));
    }
    Ok(6.0 * macs / params)
}

/// Training tokens `D = C / (xi N)` affordable at budget `C`.
pub fn tokens_for_budget(budget: f64, model_params: f64, xi: f64) -> f64 {
    budget / (xi * model_params)
}

/// Model size `N = C / (xi D)` affordable at budget `C`.
pub fn params_for_budget(budget: f64, train_tokens: f64, xi: f64) -> f64 {
    budget / (xi * train_tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchFamily {
    Baseline,
    Equivariant,
}

impl FromStr for ArchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ArchFamily::Baseline),
            "equivariant" => Ok(ArchFamily::Equivariant),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// Transformer hyperparameters for size parameter `n`. Used for planning and
/// reporting only; parameter counts always come from the experiment records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub family: ArchFamily,
    pub size_param: u64,
    pub attention_blocks: u64,
    pub scalar_channels: u64,
    pub mv_channels: u64,
    pub attention_heads: u64,
    pub scalars_per_kqv: u64,
    pub mv_per_kqv: u64,
    pub mlp_hidden_scalars: u64,
    pub mlp_hidden_mv: u64,
}

pub fn describe_arch(family: ArchFamily, n: u64) -> Result<ArchDescriptor> {
    if n < 1 {
        return Err(Error::InvalidArgument("size parameter n must be >= 1".into()));
    }
    Ok(match family {
        ArchFamily::Baseline => ArchDescriptor {
            family,
            size_param: n,
            attention_blocks: 2 * n,
            scalar_channels: 64 * n,
            mv_channels: 0,
            attention_heads: 2 * n,
            scalars_per_kqv: 64,
            mv_per_kqv: 0,
            mlp_hidden_scalars: 128 * n,
            mlp_hidden_mv: 0,
        },
        ArchFamily::Equivariant => ArchDescriptor {
            family,
            size_param: n,
            attention_blocks: 2 * n,
            scalar_channels: 4 * n,
            mv_channels: n,
            attention_heads: 2 * n,
            scalars_per_kqv: 8,
            mv_per_kqv: 2,
            mlp_hidden_scalars: 8 * n,
            mlp_hidden_mv: 2 * n,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn presets() {
        assert_eq!(xi_preset("baseline").unwrap(), 6.0);
        assert!((xi_preset("pure_multivector").unwrap() - 170.667).abs() < 1e-3);
        assert_eq!(xi_preset("equivariant_mixed").unwrap(), 61.2);
        assert_eq!(xi_preset("gatr").unwrap_err(), Error::UnknownPreset("gatr".into()));
        assert_eq!(parse_xi("12.5").unwrap(), 12.5);
        assert_eq!(parse_xi("baseline").unwrap(), 6.0);
        assert!(parse_xi("-1").is_err());
    }

    #[test]
    fn mix_endpoints() {
        for k in [1, 7, 1000] {
            assert_relative_eq!(xi_from_mix(&LayerMix(vec![LayerPair::scalar(k)])).unwrap(), 6.0);
        }
        let mv = xi_from_mix(&LayerMix(vec![LayerPair::multivector(3)])).unwrap();
        assert!((mv - 170.667).abs() < 1e-3);
    }

    #[test]
    fn mix_half_and_half() {
        // 6 * (100*1 + 100*256) / (100*1 + 100*9) = 6 * 25700 / 1000
        let mix = LayerMix(vec![LayerPair::scalar(100), LayerPair::multivector(100)]);
        assert_relative_eq!(xi_from_mix(&mix).unwrap(), 154.2, max_relative = 1e-12);
    }

    #[test]
    fn mix_errors() {
        assert!(xi_from_mix(&LayerMix(vec![])).is_err());
        assert!(xi_from_mix(&LayerMix(vec![LayerPair { macs_per_pair: 1.0, params_per_pair: 0.0, pair_count: 1 }])).is_err());
    }

    #[test]
    fn mix_json_triples() {
        let mix: LayerMix = serde_json::from_str("[[1, 1, 100], [256, 9, 100]]").unwrap();
        assert_eq!(mix.0[1], LayerPair::multivector(100));
        assert_eq!(serde_json::to_string(&mix).unwrap(), "[[1.0,1.0,100],[256.0,9.0,100]]");
    }

    #[test]
    fn budget_inversions() {
        assert_relative_eq!(tokens_for_budget(1e16, 1e5, 6.0), 1.6667e10, max_relative = 1e-4);
        assert_eq!(tokens_for_budget(6.0, 1.0, 6.0), 1.0);
        assert_relative_eq!(tokens_for_budget(6.12e14, 1e5, 61.2), 1e8, max_relative = 1e-12);
        assert_relative_eq!(params_for_budget(6e15, 1e9, 6.0), 1e6, max_relative = 1e-12);
        assert_eq!(params_for_budget(6.0, 1.0, 6.0), 1.0);
        assert_relative_eq!(params_for_budget(1e18, 1.753e11, 6.0), 9.51e5, max_relative = 1e-3);
    }

    #[test]
    fn table_columns() {
        let b = describe_arch(ArchFamily::Baseline, 1).unwrap();
        assert_eq!(
            (b.attention_blocks, b.scalar_channels, b.attention_heads, b.scalars_per_kqv, b.mlp_hidden_scalars),
            (2, 64, 2, 64, 128)
        );
        assert_eq!((b.mv_channels, b.mv_per_kqv, b.mlp_hidden_mv), (0, 0, 0));
        let e = describe_arch(ArchFamily::Equivariant, 1).unwrap();
        assert_eq!((e.attention_blocks, e.scalar_channels, e.mv_channels, e.attention_heads, e.mv_per_kqv), (2, 4, 1, 2, 2));
        assert_eq!((e.scalars_per_kqv, e.mlp_hidden_scalars, e.mlp_hidden_mv), (8, 8, 2));
        let b4 = describe_arch(ArchFamily::Baseline, 4).unwrap();
        assert_eq!((b4.attention_blocks, b4.scalar_channels, b4.attention_heads), (8, 256, 8));
        assert!(describe_arch(ArchFamily::Baseline, 0).is_err());
    }

    proptest! {
        #[test]
        fn tokens_close_budget(c in 1.0f64..1e22, n in 1.0f64..1e12, xi in 0.1f64..500.0) {
            let d = tokens_for_budget(c, n, xi);
            prop_assert!(((xi * d * n) - c).abs() <= 1e-12 * c);
        }

        #[test]
        fn mix_uniform_composition(macs in 0.5f64..300.0, params in 0.5f64..20.0, k in 1u64..1000, copies in 1usize..6) {
            let single = xi_from_mix(&LayerMix(vec![LayerPair { macs_per_pair: macs, params_per_pair: params, pair_count: k }])).unwrap();
            let many = xi_from_mix(&LayerMix(vec![LayerPair { macs_per_pair: macs, params_per_pair: params, pair_count: k }; copies])).unwrap();
            prop_assert!((single - many).abs() <= 1e-12 * single);
        }

        #[test]
        fn mix_bounded_by_endpoints(s in 1u64..10_000, m in 1u64..10_000) {
            let xi = xi_from_mix(&LayerMix(vec![LayerPair::scalar(s), LayerPair::multivector(m)])).unwrap();
            prop_assert!((6.0 - 1e-12..=6.0 * 256.0 / 9.0 + 1e-9).contains(&xi));
        }

        #[test]
        fn describe_is_linear(n in 1u64..1000, k in 1u64..50) {
            for fam in [ArchFamily::Baseline, ArchFamily::Equivariant] {
                let a = describe_arch(fam, n).unwrap();
                let b = describe_arch(fam, k * n).unwrap();
                prop_assert_eq!(b.attention_blocks, k * a.attention_blocks);
                prop_assert_eq!(b.scalar_channels, k * a.scalar_channels);
                prop_assert_eq!(b.mv_channels, k * a.mv_channels);
                prop_assert_eq!(b.attention_heads, k * a.attention_heads);
                prop_assert_eq!(b.mlp_hidden_scalars, k * a.mlp_hidden_scalars);
                prop_assert_eq!(b.mlp_hidden_mv, k * a.mlp_hidden_mv);
                prop_assert_eq!(b.scalars_per_kqv, a.scalars_per_kqv);
            }
        }
    }
}
