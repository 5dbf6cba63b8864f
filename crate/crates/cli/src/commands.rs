//! Subcommand bodies and the per-run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde::Serialize;

use connectedness::dynamics::{event_markers, EventMarker, NonConverged, SkippedWindow};
use connectedness::simulate::{default_labels, returns_to_prices, simulate_returns, PlantedVar};
use connectedness::stats::{significance_mask, AdfSpec, LagRule};
use connectedness::table::write_appendix_csv;
use connectedness::{
    aggregate_indices, average_dynamic_table, build_network, compute_log_returns, correlation_matrix, describe,
    export_graph, load_price_panel, npdc, rolling_connectedness, subsample_split, ConnectednessTable, Error,
    GraphFormat, ReturnPanel, SubsampleSpec,
};

use crate::config::{Format, Resolved, UsageError};

#[derive(Debug)]
pub enum Failure {
    /// Bad input from the user: exit status 2.
    Usage(String),
    /// Anything else: exit status 1.
    Run(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::BreakpointOutOfRange { .. } | Error::UnknownFormat(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a [String],
    config: &'a Resolved,
    outputs: Vec<String>,
    lags: Vec<usize>,
    skipped: Vec<SkippedWindow>,
    nonconverged: Vec<NonConverged>,
    events: Vec<EventMarker>,
    elapsed_ms: u128,
}

struct Run<'a> {
    cfg: &'a Resolved,
    manifest: Manifest<'a>,
}

impl Run<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.cfg.out.join(name);
        let file = File::create(&path).map_err(|e| Failure::Run(format!("cannot create {}: {e}", path.display())))?;
        self.manifest.outputs.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn returns(&self) -> Result<ReturnPanel, Failure> {
        let path = self.cfg.input()?;
        let file = File::open(path).map_err(|e| Failure::Run(format!("cannot open {}: {e}", path.display())))?;
        let prices = load_price_panel(file, &self.cfg.ingest_spec())?;
        log::info!("loaded {} series × {} prices from {}", prices.n_series(), prices.n_obs(), path.display());
        Ok(compute_log_returns(&prices)?)
    }

    /// Static fit, or the average of rolling tables when a window is set.
    fn table(&mut self, returns: &ReturnPanel) -> Result<ConnectednessTable, Failure> {
        let engine = self.cfg.engine();
        match self.cfg.window {
            None => {
                let est = engine.estimate(returns)?;
                self.manifest.lags.push(est.lag);
                if !est.nonconverged.is_empty() {
                    self.manifest.nonconverged.push(NonConverged {
                        end: *returns.dates().last().expect("estimate needs data"),
                        series: est.nonconverged,
                    });
                }
                Ok(est.table)
            }
            Some(window) => {
                let rolling = rolling_connectedness(returns, window, engine)?;
                let table = average_dynamic_table(&rolling)?;
                self.manifest.lags.extend(&rolling.lags);
                self.manifest.skipped.extend(rolling.skipped);
                self.manifest.nonconverged.extend(rolling.nonconverged);
                Ok(table)
            }
        }
    }

    fn write_table(&mut self, table: &ConnectednessTable, name: &str) -> Result<(), Failure> {
        let table = if self.cfg.raw { table.scaled(0.01) } else { table.clone() };
        let mut w = self.create(name)?;
        write_appendix_csv(&table, &mut w, self.cfg.precision)?;
        w.flush()?;
        Ok(())
    }
}

pub fn run(command: &str, args: &[String], cfg: &Resolved) -> Result<(), Failure> {
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Run(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut run = Run {
        cfg,
        manifest: Manifest {
            tool: "connectedness",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args,
            config: cfg,
            outputs: Vec::new(),
            lags: Vec::new(),
            skipped: Vec::new(),
            nonconverged: Vec::new(),
            events: Vec::new(),
            elapsed_ms: 0,
        },
    };
    match cfg.threads {
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::Run(e.to_string()))?;
            pool.install(|| dispatch(command, &mut run))?
        }
        None => dispatch(command, &mut run)?,
    }
    run.manifest.elapsed_ms = started.elapsed().as_millis();
    let text = serde_json::to_string_pretty(&run.manifest).map_err(|e| Failure::Run(e.to_string()))?;
    std::fs::write(cfg.out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn dispatch(command: &str, run: &mut Run) -> Result<(), Failure> {
    match command {
        "stats" => stats(run),
        "corr" => corr(run),
        "connect" => connect(run),
        "rolling" => rolling(run),
        "split" => split(run),
        "network" => network(run),
        "simulate" => simulate(run),
        other => Err(Failure::Usage(format!("unknown command {other}"))),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stats(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    let spec = AdfSpec {
        lag_rule: match run.cfg.adf_lags {
            Some(l) => LagRule::Fixed(l),
            None => LagRule::SchwertPruned,
        },
    };
    let rows = describe(&returns, &spec)?;
    let mut w = csv::Writer::from_writer(run.create("stats.csv")?);
    w.write_record([
        "series", "n", "mean", "sd", "skewness", "kurtosis", "jb_stat", "jb_p", "jb_sig", "adf_stat", "adf_lags",
        "adf_sig",
    ])?;
    for r in &rows {
        w.write_record([
            r.label.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.skewness.to_string(),
            r.kurtosis.to_string(),
            r.jb_stat.to_string(),
            r.jb_p.to_string(),
            r.jb_significance().stars().to_string(),
            fmt_opt(r.adf.map(|a| a.stat)),
            r.adf.map(|a| a.lags.to_string()).unwrap_or_default(),
            r.adf.map(|a| a.level.stars().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn corr(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    for method in run.cfg.corr_list() {
        let cm = correlation_matrix(&returns, method)?;
        let mask = significance_mask(&cm, run.cfg.level)?;
        let mut w = csv::Writer::from_writer(run.create(&format!("corr_{method}.csv"))?);
        let mut header = vec![String::new()];
        header.extend(cm.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in cm.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..cm.labels.len()).map(|j| fmt_opt(mask[(i, j)])));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn connect(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    let table = run.table(&returns)?;
    let name = format!("table_{}.csv", run.cfg.engine().name());
    run.write_table(&table, &name)
}

fn rolling(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    let engine = run.cfg.engine();
    let window = run.cfg.window_or_default();
    let series = rolling_connectedness(&returns, window, engine)?;
    log::info!("{} windows estimated, {} skipped", series.len(), series.skipped.len());
    let mut w = run.create(&format!("rolling_{}.csv", series.engine.name()))?;
    series.write_long_csv(&mut w, run.cfg.raw)?;
    w.flush()?;
    run.manifest.lags = series.lags;
    run.manifest.skipped = series.skipped;
    run.manifest.nonconverged = series.nonconverged;
    run.manifest.events = event_markers();
    Ok(())
}

fn file_safe(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn split(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    let spec = match &run.cfg.segment_labels {
        Some(labels) => SubsampleSpec::new(run.cfg.breakpoints.clone(), labels.clone())?,
        None if run.cfg.breakpoints == SubsampleSpec::default().breakpoints() => SubsampleSpec::default(),
        None => SubsampleSpec::with_breakpoints(run.cfg.breakpoints.clone())?,
    };
    let segments = subsample_split(&returns, &spec)?;
    let engine = run.cfg.engine().name();
    let mut summary = Vec::new();
    for seg in &segments {
        let table = run.table(&seg.panel)?;
        let tci = aggregate_indices(&table).tci();
        run.write_table(&table, &format!("table_{engine}_{}.csv", file_safe(&seg.label)))?;
        summary.push((seg, tci));
    }
    let mut w = csv::Writer::from_writer(run.create("split_segments.csv")?);
    w.write_record(["segment", "start", "end", "n_obs", "tci"])?;
    let scale = if run.cfg.raw { 0.01 } else { 1.0 };
    for (seg, tci) in summary {
        let dates = seg.panel.dates();
        w.write_record([
            seg.label.clone(),
            dates[0].to_string(),
            dates[dates.len() - 1].to_string(),
            seg.panel.n_obs().to_string(),
            (tci * scale).to_string(),
        ])?;
    }
    w.flush()?;
    run.manifest.events = event_markers();
    Ok(())
}

fn network(run: &mut Run) -> Result<(), Failure> {
    let returns = run.returns()?;
    let table = run.table(&returns)?;
    let nets = build_network(&npdc(&table), &aggregate_indices(&table), run.cfg.threshold)?;
    let format = match run.cfg.format {
        Format::Json => GraphFormat::Json,
        Format::Dot => GraphFormat::Dot,
        Format::Graphml => GraphFormat::Graphml,
    };
    for net in nets.iter().filter(|n| run.cfg.split.includes(n.split)) {
        let text = export_graph(net, format)?;
        let mut w = run.create(&format!("network_{}.{}", net.split, format.extension()))?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

/// `SOURCE:TARGET:COEF` with 1-based series numbers.
fn parse_edge(s: &str, k: usize) -> Result<(usize, usize, f64), UsageError> {
    let bad = || UsageError(format!("--edge {s:?} must look like SOURCE:TARGET:COEF with series 1..={k}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [src, tgt, coef] = parts.as_slice() else {
        return Err(bad());
    };
    let src: usize = src.trim().parse().map_err(|_| bad())?;
    let tgt: usize = tgt.trim().parse().map_err(|_| bad())?;
    let coef: f64 = coef.trim().parse().map_err(|_| bad())?;
    if src == 0 || tgt == 0 || src > k || tgt > k || !coef.is_finite() {
        return Err(bad());
    }
    Ok((src - 1, tgt - 1, coef))
}

fn simulate(run: &mut Run) -> Result<(), Failure> {
    let cfg = run.cfg;
    let mut spec = PlantedVar::independent(cfg.k, cfg.noise_sd).with_noise_corr(cfg.noise_corr);
    for e in &cfg.edges {
        let (s, t, c) = parse_edge(e, cfg.k)?;
        spec = spec.with_edge(s, t, c);
    }
    let returns = simulate_returns(&spec, cfg.t, cfg.seed).map_err(|e| match e {
        Error::Unstable(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
        other => Failure::from(other),
    })?;
    let labels = match &cfg.series {
        Some(s) if s.len() == cfg.k => s.clone(),
        Some(s) => return Err(Failure::Usage(format!("--series names {} labels but --k is {}", s.len(), cfg.k))),
        None => default_labels(cfg.k),
    };
    let prices = returns_to_prices(&returns, labels, cfg.start, 100.0)?;
    let mut w = run.create("prices.csv")?;
    prices.write_csv(&mut w, &cfg.date_column)?;
    w.flush()?;
    Ok(())
}
