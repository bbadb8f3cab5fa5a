//! Parallel-resonance screening for capacitor installations. A capacitor of
//! size Q_c at a bus with short-circuit power S_cc resonates near harmonic
//! order h = sqrt(S_cc / Q_c); installations whose resonance lands on a
//! dangerous odd harmonic are rejected.
//!
//! Two screening rules are provided. The rounding rule accepts an
//! installation iff round(h) is even. The band rule rejects it iff the
//! resonance frequency falls within a configurable band around the 3rd, 5th
//! or 7th harmonic of the fundamental. The two rules intentionally disagree
//! on some inputs; the rounding rule is the default.

use crate::cost::CapacitorCatalog;
use crate::error::{Error, Result};
use crate::network::{Network, ROOT};
use crate::placement::Placement;

/// Which screening predicate to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceMode {
    /// Feasible iff round(h) is even (round half away from zero).
    RoundCheck,
    /// Infeasible iff f_p lies within `band_hz` of an odd harmonic in
    /// {3, 5, 7} of the fundamental.
    BandCheck,
}

impl std::str::FromStr for ResonanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round" => Ok(ResonanceMode::RoundCheck),
            "band" => Ok(ResonanceMode::BandCheck),
            other => Err(Error::InvalidConfig(format!(
                "resonance mode must be \"round\" or \"band\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonancePolicy {
    pub mode: ResonanceMode,
    pub fundamental_hz: f64,
    pub band_hz: f64,
}

impl Default for ResonancePolicy {
    fn default() -> Self {
        ResonancePolicy {
            mode: ResonanceMode::RoundCheck,
            fundamental_hz: 60.0,
            band_hz: 10.0,
        }
    }
}

impl ResonancePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.fundamental_hz <= 0.0 {
            return Err(Error::InvalidConfig("fundamental_hz must be positive".into()));
        }
        if self.band_hz < 0.0 {
            return Err(Error::InvalidConfig("band_hz must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_positive(scc_va: f64, qc_var: f64) -> Result<()> {
    if scc_va <= 0.0 || !scc_va.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "short-circuit power must be positive and finite, got {scc_va}"
        )));
    }
    if qc_var <= 0.0 || !qc_var.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "capacitor size must be positive and finite, got {qc_var}"
        )));
    }
    Ok(())
}

/// Harmonic order at which parallel resonance may occur:
/// h = sqrt(S_cc / Q_c), both in compatible power units.
pub fn harmonic_order(scc_va: f64, qc_var: f64) -> Result<f64> {
    check_positive(scc_va, qc_var)?;
    Ok((scc_va / qc_var).sqrt())
}

/// Parallel resonance frequency: fundamental times the harmonic order.
pub fn resonance_frequency(scc_va: f64, qc_var: f64, policy: &ResonancePolicy) -> Result<f64> {
    Ok(policy.fundamental_hz * harmonic_order(scc_va, qc_var)?)
}

/// Half-away-from-zero rounding; ties like h = 2.5 round up to the odd 3
/// and are rejected, the conservative direction.
fn round_half_away(h: f64) -> i64 {
    (h + 0.5).floor() as i64
}

/// Would a capacitor of `qc_var` at a bus with `scc_va` be admissible under
/// the policy? Depends only on the ratio of its two power arguments, never on
/// other installations.
pub fn check_feasible(scc_va: f64, qc_var: f64, policy: &ResonancePolicy) -> Result<bool> {
    let h = harmonic_order(scc_va, qc_var)?;
    match policy.mode {
        ResonanceMode::RoundCheck => Ok(round_half_away(h) % 2 == 0),
        ResonanceMode::BandCheck => {
            let f_p = policy.fundamental_hz * h;
            for n in [3.0, 5.0, 7.0] {
                let center = n * policy.fundamental_hz;
                if f_p >= center - policy.band_hz && f_p <= center + policy.band_hz {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Outcome of screening a whole placement.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Buses whose installation fails the check, ascending.
    pub violators: Vec<usize>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Screen every installed capacitor of a placement. Feasible iff the check
/// holds at every bus with a nonzero slot. A capacitor on the substation root
/// is an error when `allow_root` is false and exempt from screening (infinite
/// short-circuit power pushes resonance beyond any finite harmonic) when it
/// is true.
pub fn placement_feasible(
    net: &Network,
    placement: &Placement,
    catalog: &CapacitorCatalog,
    policy: &ResonancePolicy,
    allow_root: bool,
) -> Result<FeasibilityReport> {
    if placement.len() != net.bus_count() {
        return Err(Error::InvalidPlacement(format!(
            "placement has {} slots but the network has {} buses",
            placement.len(),
            net.bus_count()
        )));
    }
    let mut violators = Vec::new();
    for (bus, type_id) in placement.installed() {
        if bus == ROOT {
            if !allow_root {
                return Err(Error::RootBus(bus));
            }
            if net.buses()[bus].scc_override_va.is_none() {
                continue; // exempt: unbounded short-circuit power
            }
        }
        let scc = net.short_circuit_power(bus)?;
        let qc_var = catalog.size_kvar(type_id)? * 1e3;
        if !check_feasible(scc, qc_var, policy)? {
            violators.push(bus);
        }
    }
    Ok(FeasibilityReport { violators })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use approx::assert_relative_eq;

    fn band_policy() -> ResonancePolicy {
        ResonancePolicy {
            mode: ResonanceMode::BandCheck,
            ..ResonancePolicy::default()
        }
    }

    #[test]
    fn harmonic_order_examples() {
        assert_relative_eq!(harmonic_order(16.0, 1.0).unwrap(), 4.0);
        assert_relative_eq!(harmonic_order(9.0e6, 1.0e6).unwrap(), 3.0);
        assert_relative_eq!(
            harmonic_order(2.4e6, 3.0e5).unwrap(),
            2.8284271247461903,
            epsilon = 1e-12
        );
        assert!(harmonic_order(0.0, 1.0).is_err());
        assert!(harmonic_order(1.0, -2.0).is_err());
    }

    #[test]
    fn resonance_frequency_scales_with_fundamental() {
        let policy = ResonancePolicy::default();
        assert_relative_eq!(resonance_frequency(16.0, 1.0, &policy).unwrap(), 240.0);
        assert_relative_eq!(
            resonance_frequency(8.0, 1.0, &policy).unwrap(),
            169.7056274847714,
            epsilon = 1e-9
        );
        let fifty = ResonancePolicy {
            fundamental_hz: 50.0,
            ..ResonancePolicy::default()
        };
        assert_relative_eq!(resonance_frequency(9.0, 1.0, &fifty).unwrap(), 150.0);
    }

    #[test]
    fn both_modes_agree_on_clear_cases() {
        let round = ResonancePolicy::default();
        let band = band_policy();
        // h = 4, f_p = 240 Hz: comfortably between the 3rd and 5th bands.
        assert!(check_feasible(16.0, 1.0, &round).unwrap());
        assert!(check_feasible(16.0, 1.0, &band).unwrap());
        // h = 3, f_p = 180 Hz: dead on the third harmonic.
        assert!(!check_feasible(9.0, 1.0, &round).unwrap());
        assert!(!check_feasible(9.0, 1.0, &band).unwrap());
        // h = 2.9, f_p = 174 Hz: rounds to 3, and 174 is inside [170, 190].
        assert!(!check_feasible(8.41, 1.0, &round).unwrap());
        assert!(!check_feasible(8.41, 1.0, &band).unwrap());
    }

    #[test]
    fn modes_disagree_by_construction_near_band_edges() {
        // h = 2.62, f_p = 157.2 Hz: rounds to 3 (reject) but sits outside
        // the [170, 190] band (accept).
        let round = ResonancePolicy::default();
        let band = band_policy();
        assert!(!check_feasible(6.8644, 1.0, &round).unwrap());
        assert!(check_feasible(6.8644, 1.0, &band).unwrap());
    }

    #[test]
    fn half_ties_round_away_from_zero() {
        // h = 2.5 rounds to 3: rejected.
        assert!(!check_feasible(6.25, 1.0, &ResonancePolicy::default()).unwrap());
        // h = 3.5 rounds to 4: accepted.
        assert!(check_feasible(12.25, 1.0, &ResonancePolicy::default()).unwrap());
    }

    #[test]
    fn check_is_scale_invariant() {
        let policy = ResonancePolicy::default();
        for (scc, qc) in [(9.0, 1.0), (16.0, 1.0), (6.8644, 1.0), (110.0, 1.7)] {
            let base = check_feasible(scc, qc, &policy).unwrap();
            for c in [1e-3, 7.0, 1e6] {
                assert_eq!(check_feasible(c * scc, c * qc, &policy).unwrap(), base);
            }
        }
    }

    #[test]
    fn qc_sweep_crosses_odd_thresholds_where_predicted() {
        // For fixed scc, h crosses the odd integer n exactly at qc = scc/n^2.
        let policy = ResonancePolicy::default();
        let scc = 4.9e7;
        for n in [3.0f64, 5.0, 7.0, 9.0] {
            let qc_at = scc / (n * n);
            // Just above the crossing h < n; just below it h > n.
            assert!(harmonic_order(scc, qc_at * 1.0001).unwrap() < n);
            assert!(harmonic_order(scc, qc_at * 0.9999).unwrap() > n);
            // At the crossing h = n exactly: odd, rejected.
            assert!(!check_feasible(scc, qc_at, &policy).unwrap());
        }
    }

    #[test]
    fn placement_screening_reports_violators() {
        // v_nom = 1 kV, |Z| = 0.6+j0.8 -> scc = 1e6 VA at bus 1. A 150 kvar
        // capacitor gives h = sqrt(1e6/1.5e5) = 2.58 -> rounds to 3: reject.
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open\n0,1,0.6,0.8,10,5,0\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let empty = Placement::empty(&net);
        let report = placement_feasible(&net, &empty, &catalog, &policy, false).unwrap();
        assert!(report.is_feasible());
        let placed = Placement::new(vec![0, 1], &net, &catalog).unwrap();
        let report = placement_feasible(&net, &placed, &catalog, &policy, false).unwrap();
        assert_eq!(report.violators, vec![1]);
    }

    #[test]
    fn root_placement_is_an_error_unless_allowed() {
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open\n0,1,0.6,0.8,10,5,0\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let rooted = Placement::new(vec![1, 0], &net, &catalog).unwrap();
        assert!(matches!(
            placement_feasible(&net, &rooted, &catalog, &policy, false),
            Err(Error::RootBus(0))
        ));
        let report = placement_feasible(&net, &rooted, &catalog, &policy, true).unwrap();
        assert!(report.is_feasible());
    }
}
