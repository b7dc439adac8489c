use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use oncograph::bench::{parse_model_list, run_benchmark};
use oncograph::eval::{Averaging, MaxScope, SplitRatios};
use oncograph::graph::{build_feature_graph, scaled_laplacian, LambdaMax, NodeKind};
use oncograph::ingest::{
    assemble_cohort, build_vocabulary, generate_synthetic_cohort, parse_phenotype_table, parse_report,
    render_phenotype_table, render_report, save_cohort, load_cohort, FeatureKind, ParsedReport,
    PatientRecord,
};

use crate::config::{apply_counts, parse_seed_list, RunConfig};
use crate::{BenchArgs, Failure, GenerateArgs, IngestArgs, InputArgs, InspectArgs};

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(&path, contents).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

pub fn generate(args: GenerateArgs) -> Result<u8, Failure> {
    let mut spec = RunConfig::load(args.config.as_deref())?.synthetic;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    apply_counts(&mut spec, &args.counts);
    let cohort = generate_synthetic_cohort(&spec)?;
    create_dir(&args.out)?;
    save_cohort(args.out.join("cohort.jsonl"), &cohort)?;
    let manifest = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "records": cohort.len(),
        "seed": spec.seed,
        "spec": spec,
    });
    write(
        args.out.join("generate-manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    if args.render_reports {
        let dir = args.out.join("reports");
        create_dir(&dir)?;
        for r in &cohort {
            write(dir.join(format!("{}.txt", r.patient_id)), render_report(r)?)?;
        }
        write(args.out.join("phenotypes.tsv"), render_phenotype_table(&cohort)?)?;
    }
    println!("wrote {} records to {}", cohort.len(), args.out.join("cohort.jsonl").display());
    Ok(0)
}

/// Parses every `*.txt` under `dir` in name order. All per-file problems are
/// collected before failing.
fn read_reports(dir: &Path) -> Result<Vec<ParsedReport>, Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::config(format!("cannot read report directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::parse(format!("no reports found in {}", dir.display())));
    }
    let mut reports = Vec::new();
    let mut problems = Vec::new();
    for path in &paths {
        let parsed = fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_report(&text).map_err(|e| e.to_string()));
        match parsed {
            Ok(r) => {
                for w in &r.warnings {
                    warn!("{}: {w}", path.display());
                }
                reports.push(r);
            }
            Err(e) => problems.push(format!("{}: {e}", path.display())),
        }
    }
    if !problems.is_empty() {
        return Err(Failure::parse(problems.join("\n")));
    }
    Ok(reports)
}

fn assemble(reports_dir: &Path, phenotypes: &Path) -> Result<(Vec<PatientRecord>, Vec<String>), Failure> {
    let reports = read_reports(reports_dir)?;
    let table = fs::read_to_string(phenotypes)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", phenotypes.display())))?;
    let rows = parse_phenotype_table(&table)
        .map_err(|e| Failure::parse(format!("{}: {e}", phenotypes.display())))?;
    Ok(assemble_cohort(&rows, &reports)?)
}

pub fn ingest(args: IngestArgs) -> Result<u8, Failure> {
    let (cohort, warnings) = assemble(&args.reports, &args.phenotypes)?;
    for w in &warnings {
        warn!("{w}");
    }
    let mut vocab_cfg = oncograph::ingest::VocabularyConfig::default();
    if let Some(t) = args.pheno_threshold {
        vocab_cfg.phenotype_threshold = t;
    }
    if let Some(t) = args.gene_threshold {
        vocab_cfg.gene_threshold = t;
    }
    let vocab = build_vocabulary(&cohort, &vocab_cfg)?;
    let skipped: Vec<&str> = cohort
        .iter()
        .filter(|r| vocab.patient_features(r).is_empty())
        .map(|r| r.patient_id.as_str())
        .collect();
    create_dir(&args.out)?;
    save_cohort(args.out.join("cohort.jsonl"), &cohort)?;
    write(args.out.join("vocabulary.tsv"), vocab.export_tsv())?;
    let mut skip_report = String::new();
    for id in &skipped {
        skip_report.push_str(id);
        skip_report.push_str("\tno features after filtering\n");
    }
    write(args.out.join("skipped.tsv"), skip_report)?;
    println!(
        "ingested {} patients, {} vocabulary features, {} skipped",
        cohort.len(),
        vocab.len(),
        skipped.len()
    );
    Ok(0)
}

/// Applies input flags over the file configuration and loads the cohort.
fn resolve_input(input: &InputArgs) -> Result<(RunConfig, Vec<PatientRecord>), Failure> {
    let mut cfg = RunConfig::load(input.config.as_deref())?;
    if input.cohort.is_some() {
        cfg.input.cohort = input.cohort.clone();
        cfg.input.reports = None;
        cfg.input.phenotypes = None;
    }
    if input.reports.is_some() {
        cfg.input.reports = input.reports.clone();
        cfg.input.phenotypes = input.phenotypes.clone();
        cfg.input.cohort = None;
    }
    apply_counts(&mut cfg.synthetic, &input.counts);
    if let Some(t) = input.pheno_threshold {
        cfg.bench.vocabulary.phenotype_threshold = t;
    }
    if let Some(t) = input.gene_threshold {
        cfg.bench.vocabulary.gene_threshold = t;
    }
    let cohort = match (&cfg.input.cohort, &cfg.input.reports, &cfg.input.phenotypes) {
        (Some(_), Some(_), _) => {
            return Err(Failure::config("input.cohort and input.reports are mutually exclusive"))
        }
        (Some(path), None, _) => load_cohort(path).map_err(|e| match e {
            oncograph::Error::Io(io) => Failure::config(format!("cannot read {}: {io}", path.display())),
            other => Failure::parse(format!("{}: {other}", path.display())),
        })?,
        (None, Some(dir), Some(ph)) => {
            let (cohort, warnings) = assemble(dir, ph)?;
            for w in &warnings {
                warn!("{w}");
            }
            cohort
        }
        (None, Some(_), None) => return Err(Failure::config("input.reports needs input.phenotypes")),
        (None, None, _) => generate_synthetic_cohort(&cfg.synthetic)?,
    };
    Ok((cfg, cohort))
}

pub fn bench(args: BenchArgs) -> Result<u8, Failure> {
    let (mut cfg, cohort) = resolve_input(&args.input)?;
    let b = &mut cfg.bench;
    if let Some(seed) = args.seed {
        b.seeds = vec![seed];
    }
    if let Some(seeds) = &args.seeds {
        b.seeds = parse_seed_list(seeds).map_err(Failure::config)?;
    }
    if let Some(m) = &args.models {
        b.models = parse_model_list(m)?;
    }
    if let Some(s) = &args.split {
        b.split = s.parse::<SplitRatios>()?;
    }
    if let Some(j) = args.jobs {
        b.jobs = j;
    }
    if let Some(e) = args.epochs {
        b.gnn.epochs = e;
        b.baselines.mlp.epochs = e;
    }
    if let Some(a) = &args.averaging {
        b.averaging = match a.to_ascii_lowercase().as_str() {
            "macro" => Averaging::Macro,
            "micro" => Averaging::Micro,
            other => return Err(Failure::config(format!("unknown averaging {other:?}"))),
        };
    }
    if args.global_max {
        b.max_scope = MaxScope::Global;
    }
    let out = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("results"));
    create_dir(&out)?;

    let report = run_benchmark(&cohort, &cfg.bench)?;
    report.write(&out)?;
    let tables = report.tables();
    println!("{}", tables.overall);
    println!("{}", tables.per_class);
    print!("{}", report.summary());
    for w in &report.warnings {
        warn!("{w}");
    }
    Ok(if report.failures().is_empty() { 0 } else { 1 })
}

pub fn inspect_graph(args: InspectArgs) -> Result<u8, Failure> {
    let (cfg, cohort) = resolve_input(&args.input)?;
    let vocab = build_vocabulary(&cohort, &cfg.bench.vocabulary)?;
    let graph = build_feature_graph(&cohort, &vocab, true)?;
    let laplacian = scaled_laplacian(&graph, LambdaMax::Exact)?;
    let count = |k: NodeKind| graph.nodes().iter().filter(|n| n.kind == k).count();
    let patient_edges = graph
        .edges()
        .iter()
        .filter(|&&(a, b)| graph.nodes()[a].kind == NodeKind::Patient || graph.nodes()[b].kind == NodeKind::Patient)
        .count();
    let degrees: Vec<usize> = (0..graph.num_nodes()).map(|i| graph.degree(i)).collect();
    let isolated = degrees.iter().filter(|&&d| d == 0).count();
    let mean_degree = degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64;

    println!("patients        {} ({} skipped)", cohort.len(), graph.skipped_patients().len());
    println!(
        "vocabulary      {} (phenotypes {}, pathogenic genes {}, VUS genes {})",
        vocab.len(),
        vocab.count_of_kind(FeatureKind::Phenotype),
        vocab.count_of_kind(FeatureKind::GenePathogenic),
        vocab.count_of_kind(FeatureKind::GeneVus)
    );
    println!(
        "nodes           {} (feature {}, patient {})",
        graph.num_nodes(),
        graph.num_nodes() - count(NodeKind::Patient),
        count(NodeKind::Patient)
    );
    println!(
        "edges           {} (phenotype-gene {}, patient-feature {})",
        graph.edges().len(),
        graph.edges().len() - patient_edges,
        patient_edges
    );
    println!(
        "degree          min {} mean {:.2} max {}",
        degrees.iter().min().unwrap_or(&0),
        mean_degree,
        degrees.iter().max().unwrap_or(&0)
    );
    println!("isolated nodes  {isolated}");
    println!(
        "lambda_max      {:.6}{}",
        laplacian.lambda_max,
        if laplacian.fell_back { " (fallback)" } else { "" }
    );
    println!("vocab hash      {}", vocab.hash());

    if let Some(out) = args.out {
        create_dir(&out)?;
        write(out.join("nodes.tsv"), graph.export_nodes_tsv())?;
        write(out.join("edges.tsv"), graph.export_edges_tsv())?;
        write(out.join("vocabulary.tsv"), vocab.export_tsv())?;
    }
    Ok(0)
}
