//! Radial distribution network model: file ingestion, structural validation
//! and the per-bus short-circuit power derived from cumulative path impedance.
//!
//! Networks are rooted trees. Bus 0 is always the substation. Branch rows are
//! oriented parent -> child; every non-root bus is fed by exactly one closed
//! branch. Open tie switches are accepted in the input and kept aside; they
//! carry no flow.

use std::io::BufRead;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One load bus. Loads are in kW / kvar; the root carries no load.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub p_load_kw: f64,
    pub q_load_kvar: f64,
    /// Measured short-circuit power override; when absent the Thevenin value
    /// derived from path impedance is used.
    pub scc_override_va: Option<f64>,
}

/// A series branch. `r` in ohms must be positive, `x` non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

/// Immutable radial network. Construct via [`load_network`] or
/// [`Network::from_branches`]; all derived topology (parents, children,
/// sweep order, path impedances) is precomputed.
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    open_branches: Vec<Branch>,
    v_nom_kv: f64,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Index into `branches` of the branch feeding each bus (None for root).
    branch_into: Vec<Option<usize>>,
    /// Bus order with every child before its parent (reversed BFS).
    sweep_order: Vec<usize>,
    path_z: Vec<Complex64>,
}

pub const ROOT: usize = 0;

impl Network {
    /// Build a network from explicit parts, running the full structural
    /// validation. Branch order is preserved.
    pub fn from_branches(
        v_nom_kv: f64,
        branches: Vec<Branch>,
        open_branches: Vec<Branch>,
        loads: Vec<(f64, f64)>,
        scc_overrides: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = loads.len();
        let structure = |reason: String| Error::Structure { line: 0, reason };
        if n == 0 {
            return Err(structure("network has no buses".into()));
        }
        if v_nom_kv <= 0.0 {
            return Err(structure(format!("v_nom_kv must be positive, got {v_nom_kv}")));
        }
        if branches.len() != n - 1 {
            return Err(structure(format!(
                "expected {} tree branches for {} buses, got {}",
                n - 1,
                n,
                branches.len()
            )));
        }
        let mut parent = vec![None; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut branch_into = vec![None; n];
        for (i, b) in branches.iter().enumerate() {
            if b.from == b.to {
                return Err(structure(format!("self-loop at bus {}", b.from)));
            }
            if b.from >= n || b.to >= n {
                return Err(structure(format!("branch {}->{} references unknown bus", b.from, b.to)));
            }
            if b.to == ROOT {
                return Err(structure(format!("branch {}->{} feeds the substation root", b.from, b.to)));
            }
            if b.r_ohm <= 0.0 || b.x_ohm < 0.0 {
                return Err(structure(format!(
                    "branch {}->{} needs r > 0 and x >= 0 (got r={}, x={})",
                    b.from, b.to, b.r_ohm, b.x_ohm
                )));
            }
            if branch_into[b.to].is_some() {
                return Err(structure(format!("bus {} is fed by more than one branch", b.to)));
            }
            parent[b.to] = Some(b.from);
            children[b.from].push(b.to);
            branch_into[b.to] = Some(i);
        }
        for list in &mut children {
            list.sort_unstable();
        }
        for (id, (p, q)) in loads.iter().enumerate() {
            if *p < 0.0 || *q < 0.0 {
                return Err(structure(format!("bus {id} has a negative load ({p} kW, {q} kvar)")));
            }
        }
        // BFS from the root; reversing it puts children before parents,
        // which is the order the backward sweep wants.
        let mut order = Vec::with_capacity(n);
        order.push(ROOT);
        let mut head = 0;
        while head < order.len() {
            let b = order[head];
            head += 1;
            order.extend(children[b].iter().copied());
        }
        if order.len() != n {
            let mut seen = vec![false; n];
            for &b in &order {
                seen[b] = true;
            }
            let missing: Vec<usize> = (0..n).filter(|&b| !seen[b]).collect();
            return Err(structure(format!("buses {missing:?} are not connected to the root")));
        }
        let mut path_z = vec![Complex64::new(0.0, 0.0); n];
        for &b in order.iter().skip(1) {
            let bi = branch_into[b].expect("non-root bus has a feeding branch");
            let br = &branches[bi];
            path_z[b] = path_z[br.from] + Complex64::new(br.r_ohm, br.x_ohm);
        }
        let sweep_order: Vec<usize> = order.into_iter().rev().collect();
        let buses = loads
            .into_iter()
            .zip(scc_overrides)
            .enumerate()
            .map(|(id, ((p_load_kw, q_load_kvar), scc_override_va))| Bus {
                id,
                p_load_kw,
                q_load_kvar,
                scc_override_va,
            })
            .collect();
        Ok(Network {
            buses,
            branches,
            open_branches,
            v_nom_kv,
            parent,
            children,
            branch_into,
            sweep_order,
            path_z,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    /// Closed (tree) branches, in input order.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Open tie switches accepted from the input file; excluded from the tree.
    pub fn open_branches(&self) -> &[Branch] {
        &self.open_branches
    }

    pub fn v_nom_kv(&self) -> f64 {
        self.v_nom_kv
    }

    pub fn parent(&self, bus: usize) -> Option<usize> {
        self.parent.get(bus).copied().flatten()
    }

    pub fn children(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    /// Index of the branch feeding `bus` (None for the root).
    pub fn branch_into(&self, bus: usize) -> Option<usize> {
        self.branch_into.get(bus).copied().flatten()
    }

    /// Bus order with every child visited before its parent.
    pub fn sweep_order(&self) -> &[usize] {
        &self.sweep_order
    }

    fn check_bus(&self, bus: usize) -> Result<()> {
        if bus < self.buses.len() {
            Ok(())
        } else {
            Err(Error::UnknownBus(bus))
        }
    }

    /// Series impedance of the unique root-to-bus path. The root is 0 + j0.
    pub fn path_impedance(&self, bus: usize) -> Result<Complex64> {
        self.check_bus(bus)?;
        Ok(self.path_z[bus])
    }

    /// Three-phase short-circuit power at `bus`, in VA: V_nom^2 / |Z_path|
    /// with the substation treated as an infinite bus. A per-bus override
    /// from the input file takes precedence. Errors on the root, whose
    /// Thevenin impedance is zero.
    pub fn short_circuit_power(&self, bus: usize) -> Result<f64> {
        self.check_bus(bus)?;
        if let Some(scc) = self.buses[bus].scc_override_va {
            return Ok(scc);
        }
        if bus == ROOT {
            return Err(Error::RootBus(bus));
        }
        let v_volts = self.v_nom_kv * 1e3;
        Ok(v_volts * v_volts / self.path_z[bus].norm())
    }

    /// `bus` and all of its descendants, ascending by id.
    pub fn subtree(&self, bus: usize) -> Result<Vec<usize>> {
        self.check_bus(bus)?;
        let mut out = vec![bus];
        let mut head = 0;
        while head < out.len() {
            let b = out[head];
            head += 1;
            out.extend(self.children[b].iter().copied());
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.buses
            .iter()
            .fold((0.0, 0.0), |(p, q), b| (p + b.p_load_kw, q + b.q_load_kvar))
    }
}

/// Parse a network from the CSV schema described in the README:
/// a `# v_nom_kv=<float>` metadata comment, a header row
/// `from,to,r_ohm,x_ohm,p_kw,q_kvar,open[,scc_va]`, then one row per branch
/// with the load columns describing the `to` bus. Load and `scc_va` columns
/// on open (tie switch) rows are ignored.
pub fn load_network<R: BufRead>(reader: R) -> Result<Network> {
    struct Row {
        line: usize,
        from: usize,
        to: usize,
        r: f64,
        x: f64,
        p: f64,
        q: f64,
        open: bool,
        scc: Option<f64>,
    }

    let parse = |line: usize, field: &str, what: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| Error::Parse {
            line,
            reason: format!("{what} is not a number: {field:?}"),
        })
    };
    let parse_id = |line: usize, field: &str, what: &str| -> Result<usize> {
        field.trim().parse::<usize>().map_err(|_| Error::Parse {
            line,
            reason: format!("{what} is not a bus id: {field:?}"),
        })
    };

    let mut v_nom_kv: Option<f64> = None;
    let mut has_scc_col = false;
    let mut header_seen = false;
    let mut rows: Vec<Row> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("v_nom_kv=") {
                v_nom_kv = Some(parse(line_no, value, "v_nom_kv")?);
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = text.split(',').map(str::trim).collect();
            let base = ["from", "to", "r_ohm", "x_ohm", "p_kw", "q_kvar", "open"];
            if cols.len() < base.len() || cols[..base.len()] != base {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected header {:?}, got {text:?}", base.join(",")),
                });
            }
            has_scc_col = cols.len() == base.len() + 1 && cols[base.len()] == "scc_va";
            if cols.len() > base.len() && !has_scc_col {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("unrecognized extra columns in header: {text:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        let expected = if has_scc_col { 8 } else { 7 };
        if fields.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let open = match fields[6].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("open flag must be 0 or 1, got {other:?}"),
                })
            }
        };
        let scc = if has_scc_col {
            let raw = fields[7].trim();
            if raw.is_empty() {
                None
            } else {
                let v = parse(line_no, raw, "scc_va")?;
                if v <= 0.0 {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("scc_va must be positive, got {v}"),
                    });
                }
                Some(v)
            }
        } else {
            None
        };
        rows.push(Row {
            line: line_no,
            from: parse_id(line_no, fields[0], "from")?,
            to: parse_id(line_no, fields[1], "to")?,
            r: parse(line_no, fields[2], "r_ohm")?,
            x: parse(line_no, fields[3], "x_ohm")?,
            p: parse(line_no, fields[4], "p_kw")?,
            q: parse(line_no, fields[5], "q_kvar")?,
            open,
            scc,
        });
    }

    let v_nom_kv = v_nom_kv.ok_or_else(|| Error::Parse {
        line: 0,
        reason: "missing `# v_nom_kv=<float>` metadata line".into(),
    })?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "no branch rows".into(),
        })?;
    }

    let n = rows.iter().map(|r| r.from.max(r.to)).max().unwrap() + 1;
    let structure = |line: usize, reason: String| Error::Structure { line, reason };

    // Per-row structural checks with the source line attached, then a dense-id
    // check, then the topology checks that from_branches performs globally.
    let mut loads = vec![(0.0, 0.0); n];
    let mut scc_overrides: Vec<Option<f64>> = vec![None; n];
    let mut fed = vec![false; n];
    let mut appears = vec![false; n];
    let mut branches = Vec::new();
    let mut open_branches = Vec::new();
    for row in &rows {
        appears[row.from] = true;
        appears[row.to] = true;
        if row.from == row.to {
            return Err(structure(row.line, format!("self-loop at bus {}", row.from)));
        }
        if row.open {
            open_branches.push(Branch {
                from: row.from,
                to: row.to,
                r_ohm: row.r,
                x_ohm: row.x,
            });
            continue;
        }
        if row.to == ROOT {
            return Err(structure(
                row.line,
                format!("branch {}->{} feeds the substation root", row.from, row.to),
            ));
        }
        if fed[row.to] {
            return Err(structure(row.line, format!("bus {} is fed by more than one branch", row.to)));
        }
        fed[row.to] = true;
        if row.p < 0.0 || row.q < 0.0 {
            return Err(structure(
                row.line,
                format!("bus {} has a negative load ({} kW, {} kvar)", row.to, row.p, row.q),
            ));
        }
        if row.r <= 0.0 || row.x < 0.0 {
            return Err(structure(
                row.line,
                format!(
                    "branch {}->{} needs r > 0 and x >= 0 (got r={}, x={})",
                    row.from, row.to, row.r, row.x
                ),
            ));
        }
        loads[row.to] = (row.p, row.q);
        scc_overrides[row.to] = row.scc;
        branches.push(Branch {
            from: row.from,
            to: row.to,
            r_ohm: row.r,
            x_ohm: row.x,
        });
    }
    if let Some(missing) = appears.iter().position(|seen| !seen) {
        return Err(structure(
            0,
            format!("bus ids are not dense 0..{}: bus {missing} never appears", n - 1),
        ));
    }
    Network::from_branches(v_nom_kv, branches, open_branches, loads, scc_overrides)
}

/// Convenience wrapper over [`load_network`] for a file path.
pub fn load_network_file(path: &std::path::Path) -> Result<Network> {
    let file = std::fs::File::open(path)?;
    load_network(std::io::BufReader::new(file))
}
