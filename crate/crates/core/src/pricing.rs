//! Black–Scholes valuation of single European vanilla options.
//!
//! Expiry (`tau = 0`), zero strike and zero volatility are handled as their
//! analytic limits rather than rejected, since target books are revalued at
//! exactly their own expiry dates.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Call/put indicator. The sign doubles as the fixed input-to-hidden weight
/// of the compression network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// `+1` for calls, `-1` for puts.
    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            OptionKind::Call => T::one(),
            OptionKind::Put => -T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" | "1" | "+1" => Some(OptionKind::Call),
            "put" | "p" | "-1" => Some(OptionKind::Put),
            _ => None,
        }
    }
}

/// Delta, gamma and vega of a position. Vega is per unit of volatility.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GreeksTriple<T> {
    pub delta: T,
    pub gamma: T,
    pub vega: T,
}

impl<T: Scalar> GreeksTriple<T> {
    pub fn zero() -> Self {
        Self {
            delta: T::zero(),
            gamma: T::zero(),
            vega: T::zero(),
        }
    }

    pub fn scale(self, w: T) -> Self {
        Self {
            delta: self.delta * w,
            gamma: self.gamma * w,
            vega: self.vega * w,
        }
    }
}

/// Standard normal CDF via `erfc`, accurate in both tails.
#[inline]
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * (-x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erfc()
}

#[inline]
pub fn norm_pdf<T: Scalar>(x: T) -> T {
    T::lit(0.398_942_280_401_432_7) * (T::lit(-0.5) * x * x).exp()
}

/// Option payoff `max(i_cp * (spot - strike), 0)`.
pub fn payoff<T: Scalar>(spot: T, strike: T, kind: OptionKind) -> Result<T> {
    if !(spot >= T::zero()) || !(strike >= T::zero()) {
        return invalid(format!("payoff needs spot >= 0 and strike >= 0, got {spot}, {strike}"));
    }
    Ok(intrinsic(spot, strike, kind))
}

#[inline]
pub(crate) fn intrinsic<T: Scalar>(spot: T, strike: T, kind: OptionKind) -> T {
    (kind.sign::<T>() * (spot - strike)).max(T::zero())
}

fn check_inputs<T: Scalar>(spot: T, strike: T, vol: T, rate: T, tau: T) -> Result<()> {
    if !(spot > T::zero()) {
        return invalid(format!("spot must be positive, got {spot}"));
    }
    if !(strike >= T::zero()) {
        return invalid(format!("strike must be non-negative, got {strike}"));
    }
    if !(vol >= T::zero()) {
        return invalid(format!("volatility must be non-negative, got {vol}"));
    }
    if !(tau >= T::zero()) {
        return invalid(format!("time to expiry must be non-negative, got {tau}"));
    }
    if !rate.is_finite() {
        return invalid("rate must be finite");
    }
    Ok(())
}

/// Black–Scholes price of a European option with `tau` years to expiry.
pub fn bs_price<T: Scalar>(spot: T, strike: T, vol: T, rate: T, tau: T, kind: OptionKind) -> Result<T> {
    check_inputs(spot, strike, vol, rate, tau)?;
    Ok(VanillaPricer::new(strike, vol, rate, tau, kind).price(spot))
}

/// Closed-form delta, gamma and vega.
pub fn bs_greeks<T: Scalar>(spot: T, strike: T, vol: T, rate: T, tau: T, kind: OptionKind) -> Result<GreeksTriple<T>> {
    check_inputs(spot, strike, vol, rate, tau)?;
    Ok(VanillaPricer::new(strike, vol, rate, tau, kind).greeks(spot))
}

/// Pricer for one option contract with strike and expiry fixed, reused across
/// many spot levels. Inputs are assumed validated.
#[derive(Debug, Clone, Copy)]
pub struct VanillaPricer<T> {
    strike: T,
    kind: OptionKind,
    tau: T,
    // strike * exp(-r tau)
    pv_strike: T,
    // sigma * sqrt(tau)
    vol_sqrt_tau: T,
    // (r + sigma^2/2) tau
    drift: T,
    sqrt_tau: T,
}

impl<T: Scalar> VanillaPricer<T> {
    pub fn new(strike: T, vol: T, rate: T, tau: T, kind: OptionKind) -> Self {
        let sqrt_tau = tau.sqrt();
        Self {
            strike,
            kind,
            tau,
            pv_strike: strike * (-rate * tau).exp(),
            vol_sqrt_tau: vol * sqrt_tau,
            drift: (rate + T::lit(0.5) * vol * vol) * tau,
            sqrt_tau,
        }
    }

    #[inline]
    fn is_degenerate(&self) -> bool {
        self.tau <= T::zero() || self.vol_sqrt_tau <= T::zero() || self.strike <= T::zero()
    }

    #[inline]
    fn d1(&self, spot: T) -> T {
        ((spot / self.strike).ln() + self.drift) / self.vol_sqrt_tau
    }

    pub fn price(&self, spot: T) -> T {
        if self.tau <= T::zero() {
            return intrinsic(spot, self.strike, self.kind);
        }
        if self.is_degenerate() {
            // zero strike or zero vol: discounted forward intrinsic
            return intrinsic(spot, self.pv_strike, self.kind);
        }
        let d1 = self.d1(spot);
        let d2 = d1 - self.vol_sqrt_tau;
        match self.kind {
            OptionKind::Call => spot * norm_cdf(d1) - self.pv_strike * norm_cdf(d2),
            OptionKind::Put => self.pv_strike * norm_cdf(-d2) - spot * norm_cdf(-d1),
        }
    }

    pub fn greeks(&self, spot: T) -> GreeksTriple<T> {
        if self.is_degenerate() {
            let kink = if self.tau <= T::zero() {
                self.strike
            } else {
                self.pv_strike
            };
            let half = T::lit(0.5);
            let itm_call = if spot > kink {
                T::one()
            } else if spot < kink {
                T::zero()
            } else {
                half
            };
            let delta = match self.kind {
                OptionKind::Call => itm_call,
                OptionKind::Put => itm_call - T::one(),
            };
            return GreeksTriple {
                delta,
                gamma: T::zero(),
                vega: T::zero(),
            };
        }
        let d1 = self.d1(spot);
        let pdf = norm_pdf(d1);
        let delta = match self.kind {
            OptionKind::Call => norm_cdf(d1),
            OptionKind::Put => -norm_cdf(-d1),
        };
        GreeksTriple {
            delta,
            gamma: pdf / (spot * self.vol_sqrt_tau),
            vega: spot * pdf * self.sqrt_tau,
        }
    }
}
