//! Subcommands of the `lsketch` binary. Every command writes to the given
//! writers and returns a process exit code, so tests can drive it in-process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lsketch::bench::{self, BenchPlan};
use lsketch::stats::{recommend_width, StreamStats};
use lsketch::stream::{self, StreamReader};
use lsketch::synth::{self, StreamSpec};
use lsketch::{snapshot, EdgeItem, Error, LSketch, PatternEdge, QueryResult, SketchConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lsketch", version, about = "Label-aware sliding-window graph stream sketch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a sketch from a stream file and save it as a snapshot.
    Ingest(IngestArgs),
    /// Answer queries against a snapshot.
    Query(QueryArgs),
    /// Compare the sketch with the exact oracle on a stream.
    Bench(BenchArgs),
    /// Generate a synthetic stream file.
    Gen(GenArgs),
    /// Summarize a stream file or snapshot and recommend a matrix width.
    Stats(StatsArgs),
    /// Convert a delimited raw file into the stream format.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stream: PathBuf,
    /// Snapshot to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Query kind followed by its operands, e.g. `edge a l1 b l2`.
    #[arg(num_args = 0..)]
    query: Vec<String>,
    /// Restrict weights to this edge label.
    #[arg(long)]
    edge_label: Option<String>,
    /// File with one query per line: `kind,operand,...[,edge_label]`.
    #[arg(long, conflicts_with = "query")]
    batch: Option<PathBuf>,
    /// Print one JSON object per result.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stream: PathBuf,
    /// Queries sampled per query type and repeat.
    #[arg(long, default_value_t = 500)]
    queries: usize,
    /// Independent query samples over the ingested stream.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the edge-label-restricted variants.
    #[arg(long)]
    no_labeled: bool,
    /// Longest stream the oracle will hold.
    #[arg(long, default_value_t = 20_000_000)]
    max_items: usize,
    #[arg(long, default_value_t = 3)]
    subgraph_size: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    vertices: usize,
    #[arg(long, default_value_t = 10_000)]
    edges: usize,
    #[arg(long, default_value_t = 3)]
    vertex_labels: usize,
    #[arg(long, default_value_t = 5)]
    edge_labels: usize,
    /// Fraction of vertices carrying the majority label.
    #[arg(long)]
    skew: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    duplicate_rate: f64,
    #[arg(long, default_value_t = 86_400)]
    time_span: u64,
    #[arg(long, default_value_t = 1)]
    max_weight: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long, conflicts_with = "snapshot", required_unless_present = "snapshot")]
    stream: Option<PathBuf>,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Round the recommended width up to a multiple of this.
    #[arg(long, default_value_t = 1)]
    alignment: usize,
    #[arg(long, default_value_t = 1)]
    min_width: usize,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Treat the first row as a header.
    #[arg(long)]
    header: bool,
    /// Column indices (0-based) of the source and destination ids.
    #[arg(long)]
    src: usize,
    #[arg(long)]
    dst: usize,
    #[arg(long)]
    timestamp: usize,
    #[arg(long)]
    weight: Option<usize>,
    /// Label columns; each falls back to the matching `*-value` constant.
    #[arg(long)]
    src_label: Option<usize>,
    #[arg(long)]
    dst_label: Option<usize>,
    #[arg(long)]
    edge_label: Option<usize>,
    #[arg(long, default_value = "v")]
    src_label_value: String,
    #[arg(long, default_value = "v")]
    dst_label_value: String,
    #[arg(long, default_value = "e")]
    edge_label_value: String,
}

/// A failed command: what to print and which exit code to use.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResourceLimit(_) => EXIT_RESOURCE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a, out, err),
        Command::Query(a) => query(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Gen(a) => gen(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Convert(a) => convert(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn open(path: &Path) -> std::result::Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::from(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn load_config(path: &Path) -> std::result::Result<SketchConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::from(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))?;
    Ok(SketchConfig::parse(&text)?)
}

fn read_items(path: &Path) -> std::result::Result<Vec<EdgeItem>, Failure> {
    Ok(stream::read_stream(open(path)?)?)
}

fn print_json(out: &mut dyn Write, v: &Value) -> CmdResult {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json value"))?;
    Ok(())
}

fn ingest(a: IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&a.config)?;
    for w in cfg.warnings() {
        writeln!(err, "warning: {w}")?;
    }
    let mut sketch = LSketch::new(cfg)?;
    let mut ns = 0u128;
    for item in StreamReader::new(open(&a.stream)?) {
        let item = item?;
        let t = Instant::now();
        sketch.insert(&item)?;
        ns += t.elapsed().as_nanos();
    }
    snapshot::save(&sketch, &a.out)?;
    let s = sketch.stats();
    let frac = |n: u64| if s.items == 0 { 0.0 } else { n as f64 / s.items as f64 };
    print_json(
        out,
        &json!({
            "items": s.items,
            "matrix_items": s.matrix_items,
            "pool_items": s.pool_items,
            "pool_fraction": frac(s.pool_items),
            "pool_entries": sketch.pool().len(),
            "subwindows_elapsed": s.subwindows_elapsed,
            "mean_insert_ns": if s.items == 0 { 0.0 } else { ns as f64 / s.items as f64 },
            "snapshot": a.out.display().to_string(),
        }),
    )
}

/// One parsed query.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    VertexOut(String, String),
    VertexIn(String, String),
    LabelOut(String),
    LabelIn(String),
    Edge(String, String, String, String),
    EdgeToLabel(String, String, String),
    Path(String, String, String, String),
    Subgraph(Vec<PatternEdge>),
}

pub const QUERY_KINDS: [&str; 8] = [
    "vertex-out",
    "vertex-in",
    "label-out",
    "label-in",
    "edge",
    "edge-to-label",
    "path",
    "subgraph",
];

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::VertexOut(..) => "vertex-out",
            Query::VertexIn(..) => "vertex-in",
            Query::LabelOut(..) => "label-out",
            Query::LabelIn(..) => "label-in",
            Query::Edge(..) => "edge",
            Query::EdgeToLabel(..) => "edge-to-label",
            Query::Path(..) => "path",
            Query::Subgraph(..) => "subgraph",
        }
    }

    /// Parses `kind operand...`. Returns the query and any trailing operand
    /// beyond the kind's arity (used as an edge label in batch files).
    pub fn parse(words: &[String]) -> std::result::Result<(Query, Option<String>), String> {
        let (kind, ops) = words.split_first().ok_or("missing query kind")?;
        let arity = match kind.as_str() {
            "vertex-out" | "vertex-in" => 2,
            "label-out" | "label-in" => 1,
            "edge" | "path" => 4,
            "edge-to-label" => 3,
            "subgraph" => {
                let n = ops.len() - ops.len() % 4;
                if n == 0 {
                    return Err("subgraph needs src src_label dst dst_label per pattern edge".into());
                }
                n
            }
            other => {
                return Err(format!("unknown query kind {other:?} (expected one of {})", QUERY_KINDS.join(", ")));
            }
        };
        if ops.len() < arity || ops.len() > arity + 1 {
            return Err(format!("{kind} takes {arity} operands, got {}", ops.len()));
        }
        let o = |i: usize| ops[i].clone();
        let q = match kind.as_str() {
            "vertex-out" => Query::VertexOut(o(0), o(1)),
            "vertex-in" => Query::VertexIn(o(0), o(1)),
            "label-out" => Query::LabelOut(o(0)),
            "label-in" => Query::LabelIn(o(0)),
            "edge" => Query::Edge(o(0), o(1), o(2), o(3)),
            "edge-to-label" => Query::EdgeToLabel(o(0), o(1), o(2)),
            "path" => Query::Path(o(0), o(1), o(2), o(3)),
            _ => Query::Subgraph(
                ops[..arity]
                    .chunks(4)
                    .map(|c| PatternEdge::new(&c[0], &c[1], &c[2], &c[3]))
                    .collect(),
            ),
        };
        Ok((q, ops.get(arity).cloned()))
    }
}

/// Result of one query.
#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Weight(QueryResult),
    Count(u64),
    Reachable(bool),
}

pub fn answer(sketch: &LSketch, q: &Query, el: Option<&str>) -> lsketch::Result<Answer> {
    Ok(match q {
        Query::VertexOut(v, l) => Answer::Weight(sketch.vertex_out_weight(v, l, el)),
        Query::VertexIn(v, l) => Answer::Weight(sketch.vertex_in_weight(v, l, el)),
        Query::LabelOut(l) => Answer::Weight(sketch.label_out_weight(l, el)),
        Query::LabelIn(l) => Answer::Weight(sketch.label_in_weight(l, el)),
        Query::Edge(a, al, b, bl) => Answer::Weight(sketch.edge_weight(a, al, b, bl, el)),
        Query::EdgeToLabel(a, al, bl) => Answer::Weight(sketch.edge_weight_to_label_group(a, al, bl, el)),
        Query::Path(a, al, b, bl) => Answer::Reachable(sketch.path_reachable(a, al, b, bl, el)?),
        Query::Subgraph(p) => Answer::Count(sketch.subgraph_count(p, el)?),
    })
}

fn render(q: &Query, a: &Answer, el: Option<&str>, as_json: bool) -> String {
    if as_json {
        let mut v = json!({ "kind": q.kind() });
        if let Some(l) = el {
            v["edge_label"] = json!(l);
        }
        match a {
            Answer::Weight(r) => {
                v["w"] = json!(r.w);
                if let Some(wl) = r.w_l {
                    v["w_l"] = json!(wl);
                }
            }
            Answer::Count(n) => v["count"] = json!(n),
            Answer::Reachable(b) => v["reachable"] = json!(b),
        }
        v.to_string()
    } else {
        match a {
            Answer::Weight(QueryResult { w, w_l: Some(wl) }) => format!("{w} {wl}"),
            Answer::Weight(r) => r.w.to_string(),
            Answer::Count(n) => n.to_string(),
            Answer::Reachable(b) => b.to_string(),
        }
    }
}

fn query(a: QueryArgs, out: &mut dyn Write) -> CmdResult {
    let jobs: Vec<(Query, Option<String>)> = match &a.batch {
        Some(path) => {
            let mut jobs = Vec::new();
            for (i, line) in open(path)?.lines().enumerate() {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let words: Vec<String> = line.split(',').map(|w| w.trim().to_string()).collect();
                let (q, extra) = Query::parse(&words).map_err(|m| Failure::usage(format!("{}:{}: {m}", path.display(), i + 1)))?;
                jobs.push((q, extra.or_else(|| a.edge_label.clone())));
            }
            jobs
        }
        None => {
            let (q, extra) = Query::parse(&a.query).map_err(Failure::usage)?;
            if extra.is_some() {
                return Err(Failure::usage("too many operands; pass an edge label with --edge-label"));
            }
            vec![(q, a.edge_label.clone())]
        }
    };
    let sketch = snapshot::read(open(&a.snapshot)?)?;
    let mut w = BufWriter::new(out);
    for (q, el) in &jobs {
        let el = el.as_deref().filter(|l| !l.is_empty());
        let ans = answer(&sketch, q, el)?;
        writeln!(w, "{}", render(q, &ans, el, a.json))?;
    }
    w.flush()?;
    Ok(())
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let plan = BenchPlan {
        queries: a.queries,
        repeats: a.repeats,
        seed: a.seed,
        labeled: !a.no_labeled,
        max_oracle_items: Some(a.max_items),
        subgraph_size: a.subgraph_size,
    };
    let mut items = Vec::new();
    for item in StreamReader::new(open(&a.stream)?) {
        items.push(item?);
        if items.len() > a.max_items {
            return Err(Error::ResourceLimit(format!("stream exceeds the oracle cap of {} items", a.max_items)).into());
        }
    }
    let report = bench::run(&cfg, &items, &plan)?;
    print_json(out, &serde_json::to_value(&report).expect("serializable report"))
}

fn gen(a: GenArgs, out: &mut dyn Write) -> CmdResult {
    let spec = StreamSpec {
        vertices: a.vertices,
        edges: a.edges,
        vertex_labels: a.vertex_labels,
        edge_labels: a.edge_labels,
        skew: a.skew,
        duplicate_rate: a.duplicate_rate,
        time_span: a.time_span,
        max_weight: a.max_weight,
        seed: a.seed,
    };
    let items = synth::generate(&spec)?;
    match a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            stream::write_stream(&mut w, &items)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(out);
            stream::write_stream(&mut w, &items)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> CmdResult {
    if let Some(path) = a.snapshot {
        let s = snapshot::read(open(&path)?)?;
        let st = s.stats();
        let m = s.matrix();
        let live = m.live_segments();
        let cfg = s.config();
        return print_json(
            out,
            &json!({
                "items": st.items,
                "matrix_items": st.matrix_items,
                "pool_items": st.pool_items,
                "pool_entries": s.pool().len(),
                "live_segments": live,
                "segment_capacity": m.width() * m.width() * 2,
                "matrix_width": m.width(),
                "bands": cfg.layout.band_count(),
                "registered_vertices": s.registry().map(|r| r.len()),
                "registry_collisions": s.registry().map(|r| r.collisions()),
                "recommended_width": recommend_width(live, a.alignment, a.min_width),
                "advisory": "recommendation sized from live matrix segments; enlarge for label blocking",
            }),
        );
    }
    let path = a.stream.expect("clap enforces one input");
    let items = read_items(&path)?;
    let st = StreamStats::from_items(&items);
    let d = recommend_width(st.distinct_edges, a.alignment, a.min_width);
    let mut v = serde_json::to_value(&st).expect("serializable stats");
    v["majority_label_share"] = json!(st.majority_label_share());
    v["recommended_width"] = json!(d);
    v["advisory"] = json!(
        "advisory: matrix capacity d*d*2 matched to distinct edges; label blocking usually needs a larger d"
    );
    print_json(out, &v)
}

fn convert(a: ConvertArgs, out: &mut dyn Write) -> CmdResult {
    if !a.delimiter.is_ascii() {
        return Err(Failure::usage("delimiter must be a single ASCII character"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(a.delimiter as u8)
        .has_headers(a.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(&a.input)?);
    let mut items = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1 + a.header as usize;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let col = |c: usize, name: &str| {
            rec.get(c).map(str::to_string).ok_or_else(|| Error::Parse {
                line,
                message: format!("{name} column {c} is missing"),
            })
        };
        let label = |c: Option<usize>, name: &str, fallback: &str| match c {
            Some(c) => col(c, name),
            None => Ok(fallback.to_string()),
        };
        let num = |c: usize, name: &str| -> lsketch::Result<u64> {
            let v = col(c, name)?;
            v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{name} {v:?} is not a non-negative integer"),
            })
        };
        let weight = match a.weight {
            Some(c) => num(c, "weight")?,
            None => 1,
        };
        if weight == 0 {
            continue;
        }
        let item = EdgeItem::new(
            sanitize(&col(a.src, "src")?),
            sanitize(&col(a.dst, "dst")?),
            sanitize(&label(a.src_label, "src_label", &a.src_label_value)?),
            sanitize(&label(a.dst_label, "dst_label", &a.dst_label_value)?),
            sanitize(&label(a.edge_label, "edge_label", &a.edge_label_value)?),
            weight,
            num(a.timestamp, "timestamp")?,
        );
        if item.src.is_empty() || item.dst.is_empty() {
            continue;
        }
        items.push(item);
    }
    items.sort_by_key(|i| i.timestamp);
    let mut w = BufWriter::new(File::create(&a.out)?);
    stream::write_stream(&mut w, &items)?;
    w.flush()?;
    print_json(out, &json!({ "items": items.len(), "out": a.out.display().to_string() }))
}

/// Replaces characters the stream format cannot carry.
fn sanitize(s: &str) -> String {
    s.trim().replace([',', '\n', '\r'], "_")
}
