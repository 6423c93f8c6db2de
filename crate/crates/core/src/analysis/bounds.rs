//! Closed-form bound and exponent formulas evaluated at a parameter point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::SCHEMA_VERSION;
use crate::schemes::QuantizerParams;

/// Error floor for binary messages: exp(-C ((k+1)/2)^t) with the pinned
/// uniform-prior constant C = -ln(delta/2). The constant is existence-only in
/// general; checks treat the bound as an inequality in that pinned setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryFloor {
    pub c: f64,
    pub base: f64,
    pub exponent: f64,
    pub log_floor: f64,
    pub note: String,
}

/// Guaranteed quantizer performance: -log P_e >= coeff * gamma^t once the
/// noise is below delta0, scaling as n^rho with rho = 1 + ln(1-1/m)/ln k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerBound {
    pub rho: f64,
    pub gamma: f64,
    pub margin: f64,
    pub delta0: f64,
    pub within_guarantee: bool,
    pub coeff: f64,
    pub exponent: f64,
    pub log_bound: f64,
}

/// Subexponential ceiling for irreducible node-oblivious rules with
/// dependence-graph diameter d: rho_bar = 1 + ln(1 - k^-d)/(d ln k).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObliviousCeiling {
    pub d: usize,
    pub rho_bar: f64,
}

/// Same ceiling with the worst-case diameter d = m - 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphabetCeiling {
    pub d_used: usize,
    pub rho: f64,
}

/// Symbolic large-alphabet bracket for the optimal exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingBracket {
    pub lower: String,
    pub upper: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub schema: u32,
    pub k: usize,
    pub m: usize,
    pub t: usize,
    pub delta: f64,
    pub d: usize,
    pub d_source: String,
    /// floor((k+1)/2): the per-level growth base of majority fusion.
    pub majority_base: u64,
    pub binary_floor: BinaryFloor,
    /// C^2 ((k+1)/2)^{2t}: ceiling on the product of type-I/type-II exponents.
    pub product_ceiling: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<QuantizerBound>,
    pub oblivious_ceiling: ObliviousCeiling,
    pub alphabet_ceiling: AlphabetCeiling,
    /// k^d - 1: growth base of the minimum-message-probability floor.
    pub min_floor_base: u64,
    pub scaling_bracket: ScalingBracket,
    pub annotations: Vec<String>,
}

fn rho_bar_for(k: usize, d: usize) -> f64 {
    1.0 + (1.0 - (k as f64).powi(-(d as i32))).ln() / (d as f64 * (k as f64).ln())
}

/// Evaluates every closed-form bound at (k, m, t, delta). The diameter `d`
/// defaults to m - 1 (it can never exceed that on an m-letter graph) and is
/// annotated accordingly.
pub fn compute_bounds(
    k: usize,
    m: usize,
    t: usize,
    delta: f64,
    d: Option<usize>,
) -> Result<BoundsReport> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "branching factor {k} must be at least 2"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "alphabet size {m} must be at least 2"
        )));
    }
    if t < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "crossover {delta} outside (0, 1/2)"
        )));
    }
    let mut annotations = Vec::new();
    let d_used = match d {
        Some(d) => {
            if d < 1 || d >= m {
                return Err(Error::InvalidArgument(format!(
                    "diameter {d} outside [1, {}] for an alphabet of {m} letters",
                    m - 1
                )));
            }
            d
        }
        None => {
            annotations.push(format!(
                "diameter defaulted to its ceiling m - 1 = {}",
                m - 1
            ));
            m - 1
        }
    };

    let c = -(delta / 2.0).ln();
    let base = (k as f64 + 1.0) / 2.0;
    let exponent = c * base.powi(t as i32);
    let binary_floor = BinaryFloor {
        c,
        base,
        exponent,
        log_floor: -exponent,
        note: "constant is existence-only; checked as an inequality with C = -ln(delta/2) \
               under a uniform prior on the binary symmetric channel"
            .into(),
    };
    let product_ceiling = c * c * base.powi(2 * t as i32);

    let quantizer = if m >= 3 {
        let params = QuantizerParams::new(m, k)?;
        let gamma = params.gamma();
        let coeff = (m as f64 - 1.0) / (2.0 * m as f64);
        let q_exponent = coeff * gamma.powi(t as i32);
        Some(QuantizerBound {
            rho: 1.0 + (1.0 - 1.0 / m as f64).ln() / (k as f64).ln(),
            gamma,
            margin: params.margin(),
            delta0: params.delta0(),
            within_guarantee: params.within_guarantee(delta),
            coeff,
            exponent: q_exponent,
            log_bound: -q_exponent,
        })
    } else {
        None
    };

    let oblivious_ceiling = ObliviousCeiling {
        d: d_used,
        rho_bar: rho_bar_for(k, d_used),
    };
    let alphabet_ceiling = AlphabetCeiling {
        d_used: m - 1,
        rho: rho_bar_for(k, m - 1),
    };
    debug_assert!(oblivious_ceiling.rho_bar < 1.0);
    debug_assert!(alphabet_ceiling.rho < 1.0);
    if let Some(q) = &quantizer {
        debug_assert!(q.rho < 1.0);
    }

    Ok(BoundsReport {
        schema: SCHEMA_VERSION,
        k,
        m,
        t,
        delta,
        d: d_used,
        d_source: if d.is_some() {
            "supplied".into()
        } else {
            "default (m - 1)".into()
        },
        majority_base: (k as u64).div_ceil(2),
        binary_floor,
        product_ceiling,
        quantizer,
        oblivious_ceiling,
        alphabet_ceiling,
        min_floor_base: (k as u64).pow(d_used as u32) - 1,
        scaling_bracket: ScalingBracket {
            lower: "1 - c1/m".into(),
            upper: "1 - exp(-c2*m)".into(),
        },
        annotations,
    })
}
