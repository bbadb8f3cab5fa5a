//! Capacitor catalog, amortized equipment cost and the annual objective:
//! energy price times yearly losses plus the amortized cost of every
//! installed capacitor.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::placement::Placement;
use crate::powerflow::solve_flows;

/// One catalog row: a purchasable capacitor size.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRow {
    pub type_id: u8,
    pub size_kvar: f64,
    pub cost_usd: f64,
}

/// The set of capacitor types available for installation, plus a uniform
/// price multiplier used by the capacitor-price sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitorCatalog {
    rows: Vec<CatalogRow>,
    price_scale: f64,
}

impl CapacitorCatalog {
    /// The six standard types: 150..1200 kvar.
    pub fn table_i() -> Self {
        let rows = [
            (1u8, 150.0, 1498.0),
            (2, 300.0, 1604.0),
            (3, 450.0, 1620.0),
            (4, 600.0, 1823.0),
            (5, 900.0, 2550.0),
            (6, 1200.0, 2955.0),
        ]
        .into_iter()
        .map(|(type_id, size_kvar, cost_usd)| CatalogRow {
            type_id,
            size_kvar,
            cost_usd,
        })
        .collect();
        CapacitorCatalog {
            rows,
            price_scale: 1.0,
        }
    }

    /// Build a catalog from explicit rows, checking the ordering invariants:
    /// dense type ids from 1, sizes and costs strictly increasing, cost per
    /// kvar strictly decreasing.
    pub fn new(rows: Vec<CatalogRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidCatalog("catalog has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.type_id as usize != i + 1 {
                return Err(Error::InvalidCatalog(format!(
                    "type ids must be dense from 1; row {i} has type {}",
                    row.type_id
                )));
            }
            if row.size_kvar <= 0.0 || row.cost_usd <= 0.0 {
                return Err(Error::InvalidCatalog(format!(
                    "type {} needs positive size and cost",
                    row.type_id
                )));
            }
        }
        for pair in rows.windows(2) {
            if pair[1].size_kvar <= pair[0].size_kvar {
                return Err(Error::InvalidCatalog(format!(
                    "sizes must be strictly increasing (type {} -> {})",
                    pair[0].type_id, pair[1].type_id
                )));
            }
            if pair[1].cost_usd <= pair[0].cost_usd {
                return Err(Error::InvalidCatalog(format!(
                    "costs must be strictly increasing (type {} -> {})",
                    pair[0].type_id, pair[1].type_id
                )));
            }
            if pair[1].cost_usd / pair[1].size_kvar >= pair[0].cost_usd / pair[0].size_kvar {
                return Err(Error::InvalidCatalog(format!(
                    "cost per kvar must be strictly decreasing (type {} -> {})",
                    pair[0].type_id, pair[1].type_id
                )));
            }
        }
        Ok(CapacitorCatalog {
            rows,
            price_scale: 1.0,
        })
    }

    /// Parse a `type,size_kvar,cost_usd` CSV (header row required).
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if !header_seen {
                if text != "type,size_kvar,cost_usd" {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("expected header \"type,size_kvar,cost_usd\", got {text:?}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = text.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let type_id = fields[0].trim().parse::<u8>().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("type is not an integer: {:?}", fields[0]),
            })?;
            let size_kvar = fields[1].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("size_kvar is not a number: {:?}", fields[1]),
            })?;
            let cost_usd = fields[2].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("cost_usd is not a number: {:?}", fields[2]),
            })?;
            rows.push(CatalogRow {
                type_id,
                size_kvar,
                cost_usd,
            });
        }
        CapacitorCatalog::new(rows)
    }

    pub fn with_price_scale(mut self, price_scale: f64) -> Self {
        self.price_scale = price_scale;
        self
    }

    pub fn rows(&self) -> &[CatalogRow] {
        &self.rows
    }

    /// Largest valid placement value; type ids run 1..=max_type.
    pub fn max_type(&self) -> u8 {
        self.rows.len() as u8
    }

    pub fn price_scale(&self) -> f64 {
        self.price_scale
    }

    fn row(&self, type_id: u8) -> Result<Option<&CatalogRow>> {
        if type_id == 0 {
            return Ok(None);
        }
        self.rows
            .get(type_id as usize - 1)
            .map(Some)
            .ok_or_else(|| Error::InvalidPlacement(format!("type {type_id} is not in the catalog")))
    }

    /// Capacitor size in kvar for a placement value (0 has no capacitor).
    pub fn size_kvar(&self, type_id: u8) -> Result<f64> {
        Ok(self.row(type_id)?.map_or(0.0, |r| r.size_kvar))
    }

    /// Scaled purchase price for a placement value.
    pub fn price_usd(&self, type_id: u8) -> Result<f64> {
        Ok(self.row(type_id)?.map_or(0.0, |r| r.cost_usd * self.price_scale))
    }
}

/// Interest rate, amortization horizon and energy price for the annual
/// objective.
#[derive(Debug, Clone, PartialEq)]
pub struct EconomicParams {
    /// Annual interest rate as a fraction.
    pub interest_rate: f64,
    /// Equipment amortization horizon in years.
    pub horizon_years: u32,
    /// Energy price in U$ per MWh.
    pub energy_price: f64,
}

impl EconomicParams {
    pub fn new(energy_price: f64) -> Self {
        EconomicParams {
            interest_rate: 0.12,
            horizon_years: 5,
            energy_price,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interest_rate <= 0.0 {
            return Err(Error::InvalidConfig("interest_rate must be positive".into()));
        }
        if self.horizon_years < 1 {
            return Err(Error::InvalidConfig("horizon_years must be at least 1".into()));
        }
        if self.energy_price <= 0.0 {
            return Err(Error::InvalidConfig("energy_price must be positive".into()));
        }
        Ok(())
    }

    /// i / (1 - 1/(1+i)^k): the multiplier turning a purchase price into an
    /// equivalent annual payment.
    pub fn amortization_factor(&self) -> f64 {
        let i = self.interest_rate;
        i / (1.0 - (1.0 + i).powi(-(self.horizon_years as i32)))
    }
}

/// Annualized equipment cost of one placement value: zero for an empty slot,
/// otherwise the scaled purchase price times the amortization factor.
pub fn amortized_cost(catalog: &CapacitorCatalog, econ: &EconomicParams, type_id: u8) -> Result<f64> {
    Ok(catalog.price_usd(type_id)? * econ.amortization_factor())
}

/// The annual objective: 8.76 * energy_price * total losses (kW) plus the
/// amortized cost of every installed capacitor. The 8.76 converts kW of loss
/// to MWh per year priced in U$/MWh.
pub fn total_annual_cost(
    net: &Network,
    placement: &Placement,
    catalog: &CapacitorCatalog,
    econ: &EconomicParams,
) -> Result<f64> {
    let flow = solve_flows(net, placement, catalog)?;
    let mut cost = 8.76 * econ.energy_price * flow.total_loss_kw;
    for (_, type_id) in placement.installed() {
        cost += amortized_cost(catalog, econ, type_id)?;
    }
    Ok(cost)
}

/// Yearly money saved by a placement relative to installing nothing. Signed:
/// placements that do not pay for themselves come out negative.
pub fn annual_savings(
    net: &Network,
    placement: &Placement,
    catalog: &CapacitorCatalog,
    econ: &EconomicParams,
) -> Result<f64> {
    let base = total_annual_cost(net, &Placement::empty(net), catalog, econ)?;
    let with = total_annual_cost(net, placement, catalog, econ)?;
    Ok(base - with)
}
