//! Route extraction and result rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{BlockValues, Layout};
use crate::network::{Network, Path};
use crate::saa::{SaaResult, StageTimes};

/// Flow below this is treated as zero during decomposition.
pub const DECOMPOSITION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteShare {
    /// Node ids in path order.
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    /// Share of the demand's shipments, in [0, 1].
    pub fraction: f64,
}

impl RouteShare {
    pub fn label(&self) -> String {
        self.nodes.join("-")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRoutes {
    pub demand: usize,
    pub origin: String,
    pub destination: String,
    pub commodity: String,
    pub shipments: u64,
    pub routes: Vec<RouteShare>,
    pub unmet_fraction: f64,
    /// Routed flow that did not decompose into origin-destination chains
    /// (cycles, dangling pieces), as a fraction of the demand.
    pub residual: f64,
}

impl DemandRoutes {
    pub fn routed_fraction(&self) -> f64 {
        self.routes.iter().map(|r| r.fraction).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteReport {
    /// Disruption kind label the routes were computed under, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disruption: Option<String>,
    pub demands: Vec<DemandRoutes>,
}

impl RouteReport {
    /// Demands whose flow left an undecomposable residual above the
    /// tolerance.
    pub fn residual_demands(&self) -> Vec<usize> {
        self.demands
            .iter()
            .filter(|d| d.residual > DECOMPOSITION_EPS)
            .map(|d| d.demand)
            .collect()
    }

    pub fn unmet_shipments(&self) -> f64 {
        self.demands.iter().map(|d| d.unmet_fraction * d.shipments as f64).sum()
    }
}

/// Widest origin-destination chain through links with positive flow.
/// Returns the links and the bottleneck.
fn widest_chain(net: &Network, flow: &[f64], o: usize, t: usize) -> Option<(Vec<usize>, f64)> {
    let n = net.nodes().len();
    let mut width = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    width[o] = f64::INFINITY;
    loop {
        // Widest unsettled node, lowest index on ties.
        let mut v = None;
        for u in 0..n {
            if !done[u] && width[u] > 0.0 && v.is_none_or(|b: usize| width[u] > width[b]) {
                v = Some(u);
            }
        }
        let v = v?;
        done[v] = true;
        if v == t {
            break;
        }
        for &l in net.outgoing(v) {
            let Some((_, w)) = net.endpoints(l) else { continue };
            if done[w] || flow[l] <= DECOMPOSITION_EPS {
                continue;
            }
            let cand = width[v].min(flow[l]);
            if cand > width[w] {
                width[w] = cand;
                pred[w] = Some(l);
            }
        }
    }
    let mut links = Vec::new();
    let mut v = t;
    while v != o {
        let l = pred[v]?;
        links.push(l);
        v = net.endpoints(l)?.0;
    }
    links.reverse();
    Some((links, width[t]))
}

/// Decompose each block's link fractions into origin-destination routes by
/// repeatedly taking the widest remaining chain and subtracting it.
pub fn extract_routes(net: &Network, layout: &Layout, blocks: &[BlockValues]) -> RouteReport {
    let mut demands = Vec::new();
    for b in blocks {
        let dem = &net.demands()[b.demand];
        let o = net.node_idx(dem.origin()).expect("demand endpoints exist");
        let t = net.node_idx(dem.destination()).expect("demand endpoints exist");
        let mut flow = vec![0.0; net.links().len()];
        for (p, &l) in layout.highway.iter().enumerate() {
            flow[l] = b.flow[p];
        }
        for (p, &l) in layout.rail.iter().enumerate() {
            flow[l] = b.rail_flow[p];
        }
        let into_t: f64 = net.incoming(t).iter().map(|&l| flow[l]).sum();
        let mut routes = Vec::new();
        let mut extracted = 0.0;
        while let Some((links, amount)) = widest_chain(net, &flow, o, t) {
            for &l in &links {
                flow[l] -= amount;
            }
            extracted += amount;
            let path = Path::from_links(net, links).expect("chain of existing links");
            routes.push(RouteShare {
                nodes: path.node_ids(net).into_iter().map(String::from).collect(),
                links: path.links.iter().map(|&l| net.link(l).id.clone()).collect(),
                fraction: amount,
            });
        }
        let leftover: f64 = flow.iter().filter(|&&f| f > DECOMPOSITION_EPS).sum();
        let d = dem.shipments as f64;
        demands.push(DemandRoutes {
            demand: b.demand,
            origin: dem.origin().to_string(),
            destination: dem.destination().to_string(),
            commodity: dem.commodity.clone(),
            shipments: dem.shipments,
            routes,
            unmet_fraction: if d > 0.0 { b.shortfall / d } else { 0.0 },
            residual: leftover.max((into_t - extracted).max(0.0)),
        });
    }
    RouteReport {
        disruption: None,
        demands,
    }
}

/// Everything needed to reproduce a run, written next to the result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub seed: u64,
    /// SHA-256 of each input file, keyed by path.
    pub input_digests: Vec<(String, String)>,
    pub config: serde_json::Value,
    pub threads: usize,
    pub wall_times: StageTimes,
}

impl RunManifest {
    pub fn sidecar_path(result: &std::path::Path) -> std::path::PathBuf {
        let mut name = result.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        result.with_file_name(name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (text, csv, json)")),
        }
    }
}

/// Summary row of a result, shared by every rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub disruption: String,
    pub m: usize,
    pub n: usize,
    pub n_prime: usize,
    pub seed: u64,
    /// Total wall time from the manifest, when one was found.
    pub cpu_seconds: Option<f64>,
    pub f_bar: f64,
    pub var_lower: f64,
    pub f_tilde: f64,
    pub var_upper: f64,
    pub gap: f64,
    pub sigma_gap: f64,
}

impl Summary {
    pub fn new(result: &SaaResult, manifest: Option<&RunManifest>) -> Self {
        let s = &result.stats;
        Self {
            disruption: result.config.spec.kind.label().to_string(),
            m: result.config.m,
            n: result.config.n,
            n_prime: result.config.n_prime,
            seed: result.config.seed,
            cpu_seconds: manifest.map(|m| m.wall_times.total),
            f_bar: s.f_bar,
            var_lower: s.var_lower,
            f_tilde: s.f_tilde,
            var_upper: s.var_upper,
            gap: s.gap,
            sigma_gap: s.sigma_gap,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    summary: &'a Summary,
    routes: &'a RouteReport,
}

pub fn render(result: &SaaResult, manifest: Option<&RunManifest>, format: Format) -> String {
    let summary = Summary::new(result, manifest);
    match format {
        Format::Text => render_text(&summary, &result.routes),
        Format::Csv => render_csv(&summary, &result.routes),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport {
                summary: &summary,
                routes: &result.routes,
            })
            .expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_text(s: &Summary, routes: &RouteReport) -> String {
    let mut out = String::new();
    let cpu = s.cpu_seconds.map_or("-".to_string(), |c| format!("{c:.1}"));
    let _ = writeln!(out, "Disruption: {}", s.disruption);
    let _ = writeln!(
        out,
        "{:>5} {:>3} {:>12} {:>16} {:>16} {:>12} {:>12}",
        "M", "N", "CPU time (s)", "Objective avg", "Candidate cost", "Gap", "Sigma gap"
    );
    let _ = writeln!(
        out,
        "{:>5} {:>3} {:>12} {:>16.2} {:>16.2} {:>12.2} {:>12.2}",
        s.m, s.n, cpu, s.f_bar, s.f_tilde, s.gap, s.sigma_gap
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:<10} Routes", "OD", "Commodity");
    for d in &routes.demands {
        let mut parts: Vec<String> = d
            .routes
            .iter()
            .map(|r| format!("{} ({:.0}%)", r.label(), r.fraction * 100.0))
            .collect();
        if d.unmet_fraction > DECOMPOSITION_EPS {
            parts.push(format!("unmet ({:.0}%)", d.unmet_fraction * 100.0));
        }
        let od = format!("{}-{}", d.origin, d.destination);
        let _ = writeln!(out, "{:<10} {:<10} {}", od, d.commodity, parts.join(", "));
    }
    out
}

fn render_csv(s: &Summary, routes: &RouteReport) -> String {
    let mut out = String::new();
    let cpu = s.cpu_seconds.map_or(String::new(), |c| c.to_string());
    let _ = writeln!(out, "disruption,m,n,n_prime,seed,cpu_seconds,f_bar,var_lower,f_tilde,var_upper,gap,sigma_gap");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        s.disruption, s.m, s.n, s.n_prime, s.seed, cpu, s.f_bar, s.var_lower, s.f_tilde, s.var_upper, s.gap, s.sigma_gap
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "demand,origin,destination,commodity,shipments,route,fraction");
    for d in &routes.demands {
        for r in &d.routes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                d.demand, d.origin, d.destination, d.commodity, d.shipments, r.label(), r.fraction
            );
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},unmet,{}",
            d.demand, d.origin, d.destination, d.commodity, d.shipments, d.unmet_fraction
        );
    }
    out
}
