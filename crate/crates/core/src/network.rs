//! Lumped π-section transmission network and parallel R-L-C loads.
//!
//! The dynamic (space-phasor) network is written in the synchronous D-Q frame:
//!
//! ```text
//! di_l/dt = ω_s/L_l [v_l − jω*L_l i_l − R_l i_l]
//! dv_N/dt = ω_s/C_N [i_N − i_L − v_N/R_L − jω*C_N v_N]
//! di_L/dt = ω_s/L_L [v_N − jω*L_L i_L]
//! ```
//!
//! with `i_N = CCI·[i_dev; i_l]`, `v_l = CCU·v_N` and `ω* = 1`. `C_N` collects
//! half the charging of every incident line plus the load capacitance. The
//! quasistationary counterpart is the nominal-frequency admittance matrix.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Series R-L branch with total charging capacitance `c` split between its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub l: f64,
    pub c: f64,
}

/// Constant-impedance load as parallel R, L and C; `None` means the element is
/// absent (infinite impedance).
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub node: usize,
    pub r: Option<f64>,
    pub l: Option<f64>,
    pub c: f64,
}

impl Load {
    /// Parallel R-L(-C) drawing `p + jq` at voltage magnitude `v`. A negative `q`
    /// is realized as capacitance. `c_extra` adds shunt capacitance.
    pub fn from_power(node: usize, p: f64, q: f64, v: f64, c_extra: f64) -> Self {
        let v2 = v * v;
        let r = (p > 0.0).then(|| v2 / p);
        let (l, c_q) = if q > 0.0 {
            (Some(v2 / q), 0.0)
        } else {
            (None, -q / v2)
        };
        Self {
            node,
            r,
            l,
            c: c_extra + c_q,
        }
    }

    pub fn admittance(&self) -> Complex64 {
        let g = self.r.map_or(0.0, |r| 1.0 / r);
        let bl = self.l.map_or(0.0, |l| -1.0 / l);
        Complex64::new(g, bl + self.c)
    }
}

/// Network nodes, series branches, device attachment nodes and loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub node_names: Vec<String>,
    pub branches: Vec<Branch>,
    pub device_nodes: Vec<usize>,
    pub loads: Vec<Load>,
}

impl Topology {
    pub fn new(
        node_names: Vec<String>,
        branches: Vec<Branch>,
        device_nodes: Vec<usize>,
        loads: Vec<Load>,
    ) -> Result<Self> {
        let n = node_names.len();
        if n == 0 {
            return Err(Error::Topology("no nodes".into()));
        }
        for b in &branches {
            if b.from >= n || b.to >= n || b.from == b.to {
                return Err(Error::Topology(format!("branch {} has invalid ends", b.name)));
            }
            if !(b.r >= 0.0 && b.l > 0.0 && b.c >= 0.0) {
                return Err(Error::Topology(format!(
                    "branch {} needs R >= 0, L > 0, C >= 0",
                    b.name
                )));
            }
        }
        if let Some(d) = device_nodes.iter().find(|&&d| d >= n) {
            return Err(Error::Topology(format!("device attached to missing node {d}")));
        }
        for ld in &loads {
            if ld.node >= n {
                return Err(Error::Topology(format!("load at missing node {}", ld.node)));
            }
            if ld.r.is_some_and(|r| r <= 0.0) || ld.l.is_some_and(|l| l <= 0.0) || ld.c < 0.0 {
                return Err(Error::Topology(format!(
                    "load at node {} needs positive R, L and C >= 0",
                    ld.node
                )));
            }
        }
        Ok(Self {
            node_names,
            branches,
            device_nodes,
            loads,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn n_devices(&self) -> usize {
        self.device_nodes.len()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n_nodes();
        let mut adj = vec![Vec::new(); n];
        for b in &self.branches {
            adj[b.from].push(b.to);
            adj[b.to].push(b.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(k) => Err(Error::Disconnected(k)),
            None => Ok(()),
        }
    }

    /// Shunt capacitance seen by each node: half of every incident line's
    /// charging plus load capacitance.
    pub fn node_capacitance(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_nodes()];
        for b in &self.branches {
            c[b.from] += 0.5 * b.c;
            c[b.to] += 0.5 * b.c;
        }
        for ld in &self.loads {
            c[ld.node] += ld.c;
        }
        c
    }
}

/// `CCI` (n × (m + l), device columns first) and `CCU` (l × n).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrices {
    pub cci: DMatrix<f64>,
    pub ccu: DMatrix<f64>,
}

/// Builds the injection incidence and nodal connectivity matrices. Device
/// currents enter their node; branch currents leave `from` and enter `to`.
pub fn build_incidence(t: &Topology) -> Result<IncidenceMatrices> {
    t.check_connected()?;
    let (n, m, l) = (t.n_nodes(), t.n_devices(), t.n_branches());
    let mut cci = DMatrix::zeros(n, m + l);
    for (j, &node) in t.device_nodes.iter().enumerate() {
        cci[(node, j)] = 1.0;
    }
    let mut ccu = DMatrix::zeros(l, n);
    for (j, b) in t.branches.iter().enumerate() {
        cci[(b.from, m + j)] = -1.0;
        cci[(b.to, m + j)] = 1.0;
        ccu[(j, b.from)] = 1.0;
        ccu[(j, b.to)] = -1.0;
    }
    Ok(IncidenceMatrices { cci, ccu })
}

/// Complex-valued SPC network state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStateSPC {
    pub i_l: Vec<Complex64>,
    pub v_n: Vec<Complex64>,
    /// One entry per load that has an inductor, in load order.
    pub i_load: Vec<Complex64>,
}

/// Dynamic network in the synchronous D-Q frame.
///
/// State layout (real pairs `re, im`): series branch currents, node voltages,
/// load inductor currents.
#[derive(Debug, Clone)]
pub struct SpcNetwork {
    pub topology: Topology,
    pub incidence: IncidenceMatrices,
    pub omega_s: f64,
    node_c: Vec<f64>,
    node_g: Vec<f64>,
    /// `(node, L_L)` for every load with an inductor.
    inductors: Vec<(usize, f64)>,
}

impl SpcNetwork {
    pub fn new(topology: Topology, omega_s: f64) -> Result<Self> {
        let incidence = build_incidence(&topology)?;
        let node_c = topology.node_capacitance();
        if let Some(k) = node_c.iter().position(|&c| c <= 0.0) {
            return Err(Error::Topology(format!(
                "node {} has no shunt capacitance; its voltage cannot be a state",
                topology.node_names[k]
            )));
        }
        let mut node_g = vec![0.0; topology.n_nodes()];
        let mut inductors = Vec::new();
        for ld in &topology.loads {
            if let Some(r) = ld.r {
                node_g[ld.node] += 1.0 / r;
            }
            if let Some(l) = ld.l {
                inductors.push((ld.node, l));
            }
        }
        Ok(Self {
            topology,
            incidence,
            omega_s,
            node_c,
            node_g,
            inductors,
        })
    }

    pub fn n_states(&self) -> usize {
        2 * (self.topology.n_branches() + self.topology.n_nodes() + self.inductors.len())
    }

    pub fn node_offset(&self) -> usize {
        2 * self.topology.n_branches()
    }

    pub fn load_offset(&self) -> usize {
        2 * (self.topology.n_branches() + self.topology.n_nodes())
    }

    pub fn inductors(&self) -> &[(usize, f64)] {
        &self.inductors
    }

    pub fn node_voltage(&self, x: &[f64], k: usize) -> Complex64 {
        let o = self.node_offset() + 2 * k;
        Complex64::new(x[o], x[o + 1])
    }

    pub fn state_labels(&self) -> Vec<String> {
        let t = &self.topology;
        let mut out = Vec::with_capacity(self.n_states());
        for b in &t.branches {
            out.push(format!("line{}.iD", b.name));
            out.push(format!("line{}.iQ", b.name));
        }
        for name in &t.node_names {
            out.push(format!("bus{name}.vD"));
            out.push(format!("bus{name}.vQ"));
        }
        for (node, _) in &self.inductors {
            out.push(format!("load{}.iD", t.node_names[*node]));
            out.push(format!("load{}.iQ", t.node_names[*node]));
        }
        out
    }

    pub fn pack(&self, s: &NetworkStateSPC) -> Vec<f64> {
        s.i_l
            .iter()
            .chain(&s.v_n)
            .chain(&s.i_load)
            .flat_map(|z| [z.re, z.im])
            .collect()
    }

    pub fn unpack(&self, x: &[f64]) -> NetworkStateSPC {
        let c = |o: usize| Complex64::new(x[o], x[o + 1]);
        let (l, n) = (self.topology.n_branches(), self.topology.n_nodes());
        NetworkStateSPC {
            i_l: (0..l).map(|j| c(2 * j)).collect(),
            v_n: (0..n).map(|k| c(2 * (l + k))).collect(),
            i_load: (0..self.inductors.len()).map(|j| c(2 * (l + n + j))).collect(),
        }
    }

    /// Writes the network derivatives for state `x` (network slice only) and
    /// device injections `inj` (one per device, D-Q frame) into `dx`.
    pub fn derivatives_into(&self, x: &[f64], inj: &[Complex64], dx: &mut [f64]) {
        let t = &self.topology;
        let (m, l, n) = (t.n_devices(), t.n_branches(), t.n_nodes());
        let ws = self.omega_s;
        let j = Complex64::i();
        let cx = |o: usize| Complex64::new(x[o], x[o + 1]);
        let i_l: Vec<Complex64> = (0..l).map(|b| cx(2 * b)).collect();
        let v_n: Vec<Complex64> = (0..n).map(|k| cx(2 * (l + k))).collect();

        // i_N = CCI · [i_dev; i_l]
        let cci = &self.incidence.cci;
        let mut i_n = vec![Complex64::new(0.0, 0.0); n];
        for (k, ik) in i_n.iter_mut().enumerate() {
            for (col, src) in inj.iter().chain(&i_l).enumerate().take(m + l) {
                let w = cci[(k, col)];
                if w != 0.0 {
                    *ik += src * w;
                }
            }
        }
        // v_l = CCU · v_N
        let ccu = &self.incidence.ccu;
        for (bi, br) in t.branches.iter().enumerate() {
            let mut v_l = Complex64::new(0.0, 0.0);
            for (k, vk) in v_n.iter().enumerate() {
                let w = ccu[(bi, k)];
                if w != 0.0 {
                    v_l += vk * w;
                }
            }
            let d = (v_l - j * br.l * i_l[bi] - br.r * i_l[bi]) * (ws / br.l);
            dx[2 * bi] = d.re;
            dx[2 * bi + 1] = d.im;
        }
        let lo = 2 * (l + n);
        for (li, &(node, ll)) in self.inductors.iter().enumerate() {
            let il = cx(lo + 2 * li);
            i_n[node] -= il;
            let d = (v_n[node] - j * ll * il) * (ws / ll);
            dx[lo + 2 * li] = d.re;
            dx[lo + 2 * li + 1] = d.im;
        }
        for k in 0..n {
            let c = self.node_c[k];
            let d = (i_n[k] - v_n[k] * self.node_g[k] - j * c * v_n[k]) * (ws / c);
            dx[2 * (l + k)] = d.re;
            dx[2 * (l + k) + 1] = d.im;
        }
    }

    /// Network derivatives on the structured state.
    pub fn derivatives(&self, state: &NetworkStateSPC, inj: &[Complex64]) -> NetworkStateSPC {
        let x = self.pack(state);
        let mut dx = vec![0.0; x.len()];
        self.derivatives_into(&x, inj, &mut dx);
        self.unpack(&dx)
    }

    /// Exact state matrix of the (linear) network with device injections held
    /// at zero.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let ns = self.n_states();
        let inj = vec![Complex64::new(0.0, 0.0); self.topology.n_devices()];
        let mut a = DMatrix::zeros(ns, ns);
        let mut e = vec![0.0; ns];
        let mut col = vec![0.0; ns];
        for c in 0..ns {
            e[c] = 1.0;
            self.derivatives_into(&e, &inj, &mut col);
            a.set_column(c, &DVector::from_column_slice(&col));
            e[c] = 0.0;
        }
        a
    }

    /// Equilibrium of the network for constant injections, computed from the
    /// phasor laws (branch `R + jL`, shunt `G + jC`, load inductor `jL_L`).
    pub fn equilibrium(&self, inj: &[Complex64]) -> Result<NetworkStateSPC> {
        let y = build_admittance(&self.topology)?;
        let i_n = device_injection_vector(&self.topology, inj);
        let v_n = qpc_solve(&y, &i_n)?;
        Ok(self.state_from_voltages(v_n.as_slice()))
    }

    /// Branch and load inductor currents consistent with node voltages `v`.
    pub fn state_from_voltages(&self, v: &[Complex64]) -> NetworkStateSPC {
        let i_l = self
            .topology
            .branches
            .iter()
            .map(|b| (v[b.from] - v[b.to]) / Complex64::new(b.r, b.l))
            .collect();
        let i_load = self
            .inductors
            .iter()
            .map(|&(node, l)| v[node] / Complex64::new(0.0, l))
            .collect();
        NetworkStateSPC {
            i_l,
            v_n: v.to_vec(),
            i_load,
        }
    }
}

/// Sum of device injections per node.
pub fn device_injection_vector(t: &Topology, inj: &[Complex64]) -> DVector<Complex64> {
    let mut i = DVector::from_element(t.n_nodes(), Complex64::new(0.0, 0.0));
    for (&node, &z) in t.device_nodes.iter().zip(inj) {
        i[node] += z;
    }
    i
}

/// Nominal-frequency bus admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub y: DMatrix<Complex64>,
}

/// Y-bus at `ω* = 1`: series `1/(R + jL)`, `jC/2` at each line end, loads as
/// shunt admittances.
pub fn build_admittance(t: &Topology) -> Result<AdmittanceMatrix> {
    t.check_connected()?;
    let n = t.n_nodes();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for b in &t.branches {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(b.r, b.l);
        let yc = Complex64::new(0.0, 0.5 * b.c);
        y[(b.from, b.from)] += ys + yc;
        y[(b.to, b.to)] += ys + yc;
        y[(b.from, b.to)] -= ys;
        y[(b.to, b.from)] -= ys;
    }
    for ld in &t.loads {
        y[(ld.node, ld.node)] += ld.admittance();
    }
    Ok(AdmittanceMatrix { y })
}

/// Solves `Y v = i` by dense LU and verifies the residual.
pub fn qpc_solve(y: &AdmittanceMatrix, inj: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let lu = y.y.clone().lu();
    let v = lu.solve(inj).ok_or(Error::Singular("admittance solve"))?;
    let residual = (&y.y * &v - inj).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = 1.0 + inj.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-10 * scale {
        return Err(Error::Singular("admittance solve"));
    }
    Ok(v)
}

/// Real power entering the network from devices, and the power dissipated in
/// branch and load resistances, at a quasistationary operating point.
pub fn power_balance(t: &Topology, v: &[Complex64], inj: &[Complex64]) -> (f64, f64) {
    let i = device_injection_vector(t, inj);
    let injected: f64 = (0..t.n_nodes()).map(|k| (v[k] * i[k].conj()).re).sum();
    let mut dissipated = 0.0;
    for b in &t.branches {
        let ib = (v[b.from] - v[b.to]) / Complex64::new(b.r, b.l);
        dissipated += b.r * ib.norm_sqr();
    }
    for ld in &t.loads {
        if let Some(r) = ld.r {
            dissipated += v[ld.node].norm_sqr() / r;
        }
    }
    (injected, dissipated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::OMEGA_S;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|k| k.to_string()).collect()
    }

    fn branch(from: usize, to: usize, r: f64, l: f64, c: f64) -> Branch {
        Branch {
            name: format!("{}-{}", from + 1, to + 1),
            from,
            to,
            r,
            l,
            c,
        }
    }

    #[test]
    fn two_node_incidence() {
        let t = Topology::new(names(2), vec![branch(0, 1, 0.01, 0.1, 0.0)], vec![0], vec![]).unwrap();
        let m = build_incidence(&t).unwrap();
        assert_eq!(m.cci, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]));
        assert_eq!(m.ccu, DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
    }

    #[test]
    fn incidence_identities_hold_for_consistent_assignments() {
        let t = Topology::new(
            names(3),
            vec![branch(0, 1, 0.01, 0.1, 0.0), branch(1, 2, 0.02, 0.2, 0.0)],
            vec![0, 2],
            vec![],
        )
        .unwrap();
        let m = build_incidence(&t).unwrap();
        // Device 1 pushes 1 pu through both branches into device 2's node,
        // which draws it back out: every node's net shunt current is zero.
        let currents = DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0]);
        assert!((&m.cci * currents).norm() < 1e-15);
        let v = DVector::from_vec(vec![1.0, 0.7, 0.2]);
        let vl = &m.ccu * v;
        assert!((vl[0] - 0.3).abs() < 1e-15 && (vl[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_node_single_device() {
        let t = Topology::new(names(1), vec![], vec![0], vec![]).unwrap();
        let m = build_incidence(&t).unwrap();
        assert_eq!(m.cci, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(m.ccu.shape(), (0, 1));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let t = Topology::new(names(3), vec![branch(0, 1, 0.0, 0.1, 0.0)], vec![0], vec![]).unwrap();
        assert!(matches!(build_incidence(&t), Err(Error::Disconnected(2))));
    }

    #[test]
    fn invalid_elements_are_rejected() {
        assert!(Topology::new(names(2), vec![branch(0, 1, 0.0, 0.0, 0.0)], vec![], vec![]).is_err());
        assert!(Topology::new(names(2), vec![branch(0, 1, 0.0, 0.1, 0.0)], vec![5], vec![]).is_err());
    }

    #[test]
    fn branch_decay_and_rotation() {
        // Two nodes with a branch; the branch current alone with v_l = 0.
        let t = Topology::new(names(2), vec![branch(0, 1, 0.01, 0.1, 0.02)], vec![], vec![]).unwrap();
        let net = SpcNetwork::new(t, OMEGA_S).unwrap();
        let i0 = Complex64::new(0.3, -0.2);
        let s = NetworkStateSPC {
            i_l: vec![i0],
            v_n: vec![Complex64::new(0.0, 0.0); 2],
            i_load: vec![],
        };
        let d = net.derivatives(&s, &[]);
        let expected = -(Complex64::new(OMEGA_S * 0.01 / 0.1, OMEGA_S)) * i0;
        assert!((d.i_l[0] - expected).norm() < 1e-9);
    }

    #[test]
    fn admittance_examples() {
        let t = Topology::new(names(2), vec![branch(0, 1, 0.0, 1.0, 0.0)], vec![], vec![]).unwrap();
        let y = build_admittance(&t).unwrap();
        let j = Complex64::i();
        assert!((y.y[(0, 0)] + j).norm() < 1e-15);
        assert!((y.y[(0, 1)] - j).norm() < 1e-15);

        let loaded = Topology::new(
            names(2),
            vec![branch(0, 1, 0.0, 1.0, 0.0)],
            vec![],
            vec![Load {
                node: 1,
                r: Some(1.0),
                l: None,
                c: 0.0,
            }],
        )
        .unwrap();
        let y2 = build_admittance(&loaded).unwrap();
        assert!((y2.y[(1, 1)] - (Complex64::new(1.0, 0.0) - j)).norm() < 1e-15);
    }

    #[test]
    fn qpc_solve_examples() {
        let eye = AdmittanceMatrix {
            y: DMatrix::identity(3, 3),
        };
        let e1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into()]);
        assert_eq!(qpc_solve(&eye, &e1).unwrap(), e1);
        let zero = DVector::from_element(3, Complex64::new(0.0, 0.0));
        assert_eq!(qpc_solve(&eye, &zero).unwrap(), zero);

        // Construct the injection from a chosen voltage and recover it.
        let t = Topology::new(
            names(2),
            vec![branch(0, 1, 0.0, 1.0, 0.0)],
            vec![],
            vec![Load {
                node: 1,
                r: Some(2.0),
                l: None,
                c: 0.0,
            }],
        )
        .unwrap();
        let y = build_admittance(&t).unwrap();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.8, -0.1)]);
        let i = &y.y * &v;
        let back = qpc_solve(&y, &i).unwrap();
        assert!((back - v).norm() < 1e-12);
    }

    #[test]
    fn floating_network_is_singular() {
        let t = Topology::new(names(2), vec![branch(0, 1, 0.0, 1.0, 0.0)], vec![], vec![]).unwrap();
        let y = build_admittance(&t).unwrap();
        let i = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert!(qpc_solve(&y, &i).is_err());
    }

    #[test]
    fn node_without_capacitance_is_rejected_in_spc() {
        let t = Topology::new(names(2), vec![branch(0, 1, 0.0, 1.0, 0.0)], vec![0], vec![]).unwrap();
        assert!(matches!(SpcNetwork::new(t, OMEGA_S), Err(Error::Topology(_))));
    }

    #[test]
    fn load_synthesis_from_power() {
        let ld = Load::from_power(0, 2.0, 0.5, 1.0, 0.1);
        assert_eq!(ld.r, Some(0.5));
        assert_eq!(ld.l, Some(2.0));
        assert!((ld.admittance() - Complex64::new(2.0, -0.5 + 0.1)).norm() < 1e-15);
        let cap = Load::from_power(0, 1.0, -0.3, 1.0, 0.0);
        assert!(cap.l.is_none() && (cap.c - 0.3).abs() < 1e-15);
    }
}
