//! Capacitor placement vectors: one slot per bus, 0 = no capacitor,
//! 1..=k = a row of the capacitor catalog.

use crate::cost::CapacitorCatalog;
use crate::error::{Error, Result};
use crate::network::Network;

/// Integer placement vector over the network's buses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Placement {
    slots: Vec<u8>,
}

impl Placement {
    /// The all-zero placement (no capacitors installed).
    pub fn empty(net: &Network) -> Self {
        Placement {
            slots: vec![0; net.bus_count()],
        }
    }

    /// Wrap a raw slot vector, validating length and catalog range.
    pub fn new(slots: Vec<u8>, net: &Network, catalog: &CapacitorCatalog) -> Result<Self> {
        if slots.len() != net.bus_count() {
            return Err(Error::InvalidPlacement(format!(
                "placement has {} slots but the network has {} buses",
                slots.len(),
                net.bus_count()
            )));
        }
        let max = catalog.max_type();
        if let Some(bad) = slots.iter().position(|&s| s > max) {
            return Err(Error::InvalidPlacement(format!(
                "slot {bad} holds type {} but the catalog has types 0..={max}",
                slots[bad]
            )));
        }
        Ok(Placement { slots })
    }

    pub fn slots(&self) -> &[u8] {
        &self.slots
    }

    pub fn get(&self, bus: usize) -> u8 {
        self.slots[bus]
    }

    pub fn set(&mut self, bus: usize, type_id: u8) {
        self.slots[bus] = type_id;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(|&s| s == 0)
    }

    /// Buses with a capacitor installed, ascending.
    pub fn installed(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(b, &s)| (b, s))
    }

    pub fn installed_count(&self) -> usize {
        self.slots.iter().filter(|&&s| s != 0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CapacitorCatalog;
    use crate::network::load_network;

    #[test]
    fn rejects_wrong_length_and_out_of_range_types() {
        let net = load_network(
            "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open\n0,1,0.1,0.0,0,0,0\n".as_bytes(),
        )
        .unwrap();
        let catalog = CapacitorCatalog::table_i();
        assert!(Placement::new(vec![0, 0, 0], &net, &catalog).is_err());
        assert!(Placement::new(vec![0, 7], &net, &catalog).is_err());
        let p = Placement::new(vec![0, 6], &net, &catalog).unwrap();
        assert_eq!(p.installed_count(), 1);
    }
}
