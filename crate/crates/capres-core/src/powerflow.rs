//! Simplified branch-flow estimation for radial feeders: one backward sweep
//! from the leaves to the root with every bus held at 1 pu. Branch losses are
//! not re-injected into upstream flows, so each evaluation is a single O(n)
//! pass.
//!
//! Per-unit base: S_base = 1 MVA, V_base = v_nom. Losses are evaluated in
//! per-unit and reported in kW.

use crate::cost::CapacitorCatalog;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::placement::Placement;

/// Branch flows and losses for one placement. Indices follow
/// `Network::branches()` order.
#[derive(Debug, Clone)]
pub struct FlowState {
    /// Active power through each branch, kW.
    pub p_flow_kw: Vec<f64>,
    /// Reactive power through each branch, kvar. Negative when capacitors
    /// downstream over-compensate.
    pub q_flow_kvar: Vec<f64>,
    /// Loss of each branch, kW.
    pub branch_loss_kw: Vec<f64>,
    /// The reactive component r * Q^2 / V^2 of each branch loss, kW. This is
    /// the part a capacitor can act on.
    pub branch_loss_reactive_kw: Vec<f64>,
    pub total_loss_kw: f64,
}

/// One backward sweep: aggregate the net load of every subtree into its
/// feeding branch, with each installed capacitor injecting its catalog kvar
/// at its bus, then price each branch at r * (P^2 + Q^2) / V^2 with V fixed
/// at 1 pu.
pub fn solve_flows(
    net: &Network,
    placement: &Placement,
    catalog: &CapacitorCatalog,
) -> Result<FlowState> {
    if placement.len() != net.bus_count() {
        return Err(Error::InvalidPlacement(format!(
            "placement has {} slots but the network has {} buses",
            placement.len(),
            net.bus_count()
        )));
    }
    let n = net.bus_count();
    let nb = net.branches().len();
    let mut p_acc = vec![0.0f64; n];
    let mut q_acc = vec![0.0f64; n];
    let mut p_flow_kw = vec![0.0f64; nb];
    let mut q_flow_kvar = vec![0.0f64; nb];
    let mut branch_loss_kw = vec![0.0f64; nb];
    let mut branch_loss_reactive_kw = vec![0.0f64; nb];
    // Z_base = v_nom^2 with S_base = 1 MVA; flows in MW/Mvar are pu directly.
    let z_base = net.v_nom_kv() * net.v_nom_kv();

    for &bus in net.sweep_order() {
        let b = &net.buses()[bus];
        let qc = catalog.size_kvar(placement.get(bus))?;
        p_acc[bus] += b.p_load_kw;
        q_acc[bus] += b.q_load_kvar - qc;
        if let Some(bi) = net.branch_into(bus) {
            let br = &net.branches()[bi];
            let p_pu = p_acc[bus] / 1000.0;
            let q_pu = q_acc[bus] / 1000.0;
            let r_pu = br.r_ohm / z_base;
            branch_loss_kw[bi] = r_pu * (p_pu * p_pu + q_pu * q_pu) * 1000.0;
            branch_loss_reactive_kw[bi] = r_pu * (q_pu * q_pu) * 1000.0;
            p_flow_kw[bi] = p_acc[bus];
            q_flow_kvar[bi] = q_acc[bus];
            p_acc[br.from] += p_acc[bus];
            q_acc[br.from] += q_acc[bus];
        }
    }
    let total_loss_kw = branch_loss_kw.iter().sum();
    Ok(FlowState {
        p_flow_kw,
        q_flow_kvar,
        branch_loss_kw,
        branch_loss_reactive_kw,
        total_loss_kw,
    })
}

/// Loss of the subnetwork hanging from `bus`: the sum of branch losses over
/// every branch whose `to` endpoint lies in the bus's subtree, which includes
/// the branch feeding the bus itself. The root's value is the total loss.
pub fn subtree_loss(net: &Network, flow: &FlowState, bus: usize) -> Result<f64> {
    Ok(subtree_losses(net, flow)?[bus_checked(net, bus)?])
}

fn bus_checked(net: &Network, bus: usize) -> Result<usize> {
    if bus < net.bus_count() {
        Ok(bus)
    } else {
        Err(Error::UnknownBus(bus))
    }
}

/// Subtree loss of every bus at once, accumulated leaves-to-root in O(n).
pub fn subtree_losses(net: &Network, flow: &FlowState) -> Result<Vec<f64>> {
    if flow.branch_loss_kw.len() != net.branches().len() {
        return Err(Error::InvalidPlacement(
            "flow state does not match the network".into(),
        ));
    }
    let mut acc = vec![0.0f64; net.bus_count()];
    for &bus in net.sweep_order() {
        if let Some(bi) = net.branch_into(bus) {
            acc[bus] += flow.branch_loss_kw[bi];
            acc[net.branches()[bi].from] += acc[bus];
        }
    }
    Ok(acc)
}

/// The literal per-arc form sum r * (P^2 + Q^2 - Qbar^2) / V^2 where P, Q are
/// the uncompensated base flows and Qbar is the capacitor kvar aggregated the
/// same way loads are. Exposed only to cross-check [`solve_flows`], whose
/// balance-constraint semantics square the reduced flow (Q - Qbar) instead.
/// Individual arc terms may be negative under heavy compensation.
pub fn loss_eq5(
    net: &Network,
    flow_base: &FlowState,
    placement: &Placement,
    catalog: &CapacitorCatalog,
) -> Result<f64> {
    if placement.len() != net.bus_count() {
        return Err(Error::InvalidPlacement(format!(
            "placement has {} slots but the network has {} buses",
            placement.len(),
            net.bus_count()
        )));
    }
    if flow_base.branch_loss_kw.len() != net.branches().len() {
        return Err(Error::InvalidPlacement(
            "flow state does not match the network".into(),
        ));
    }
    let n = net.bus_count();
    let z_base = net.v_nom_kv() * net.v_nom_kv();
    let mut qbar_acc = vec![0.0f64; n];
    let mut total = 0.0;
    for &bus in net.sweep_order() {
        qbar_acc[bus] += catalog.size_kvar(placement.get(bus))?;
        if let Some(bi) = net.branch_into(bus) {
            let br = &net.branches()[bi];
            let r_pu = br.r_ohm / z_base;
            let p_pu = flow_base.p_flow_kw[bi] / 1000.0;
            let q_pu = flow_base.q_flow_kvar[bi] / 1000.0;
            let qbar_pu = qbar_acc[bus] / 1000.0;
            total += r_pu * (p_pu * p_pu + q_pu * q_pu - qbar_pu * qbar_pu) * 1000.0;
            qbar_acc[br.from] += qbar_acc[bus];
        }
    }
    Ok(total)
}
