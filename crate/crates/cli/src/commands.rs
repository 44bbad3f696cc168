use std::collections::{BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde_json::{json, Value};

use tablesim::audit::{leakage_free_split, similarity_distribution, transitive_leakage, PairSet};
use tablesim::embedding::Embedder;
use tablesim::llm::{generate_description, ChatProvider};
use tablesim::negatives::{mine_all, read_negatives, write_negatives, Bm25Index};
use tablesim::ops::{generate, GenerationConfig};
use tablesim::retrieval::{build_index, evaluate, evaluate_with, split_dataset, FusedIndex, Index, IndexEntry, Query, RetrievalError};
use tablesim::seed;
use tablesim::serialize::{serialize_title_description, TextView};
use tablesim::table::{parse_record, write_record, CorpusRecord, Table};
use tablesim::trainer::{read_checkpoint, train, write_checkpoint, ProjectionModel, TrainSample};

use crate::config::{usage, RunConfig};
use crate::io::{create, group_pairs, load_corpus, load_tables, read_pairs, read_text, write_json, write_lines, PairLine};

/// Tables described between flushes of the output file.
const DESCRIBE_CHUNK: usize = 32;

fn out_file(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn or_out(path: &Option<PathBuf>, cfg: &RunConfig, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| out_file(cfg, name))
}

/// Applies `f` to every item on `workers` scoped threads, keeping order.
fn par_map<I: Sync, O: Send>(items: &[I], workers: usize, f: impl Fn(&I) -> O + Sync) -> Vec<O> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<O>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every slot filled")).collect()
}

/// Records already in the output file. A torn final line is dropped.
fn described_so_far(path: &Path) -> Result<Vec<CorpusRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = read_text(path)?;
    let mut done = Vec::new();
    let mut torn = false;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match parse_record(line) {
            Ok(r) => done.push(r),
            Err(e) => {
                warn!("dropping unreadable line in {}: {e}", path.display());
                torn = true;
                break;
            }
        }
    }
    if torn {
        write_lines(path, done.iter().map(write_record))?;
    }
    Ok(done)
}

pub fn describe(cfg: &RunConfig) -> Result<Value> {
    let records = load_corpus(&cfg.corpus)?;
    let path = out_file(cfg, "described.jsonl");
    let err_path = out_file(cfg, "describe_errors.jsonl");
    let done = described_so_far(&path)?;
    let done_ids: BTreeSet<String> = done.iter().map(|r| r.table.id().to_string()).collect();
    if let Some(stray) = done_ids.iter().find(|id| !records.iter().any(|r| r.table.id() == id.as_str())) {
        bail!("{} holds table `{stray}` that is not in the corpus", path.display());
    }
    let todo: Vec<&CorpusRecord> = records.iter().filter(|r| !done_ids.contains(r.table.id())).collect();
    info!("describe: {} done, {} to go", done_ids.len(), todo.len());

    let provider = cfg.chat_provider().build()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut out = BufWriter::new(OpenOptions::new().create(true).append(true).open(&path)?);
    let mut errors = BufWriter::new(OpenOptions::new().create(true).append(true).open(&err_path)?);
    let (mut n_new, mut n_failed) = (0, 0);
    for chunk in todo.chunks(DESCRIBE_CHUNK) {
        let results = par_map(chunk, cfg.workers, |r| {
            generate_description(provider.as_ref(), &r.table, seed::derive_str(cfg.seed, r.table.id()))
        });
        for (r, res) in chunk.iter().zip(results) {
            match res {
                Ok(d) => {
                    let mut rec = (*r).clone();
                    rec.table = rec.table.with_description(d);
                    writeln!(out, "{}", write_record(&rec))?;
                    n_new += 1;
                }
                Err(e) => {
                    warn!("describe {}: {e}", r.table.id());
                    writeln!(errors, "{}", json!({ "table_id": r.table.id(), "error": e.to_string() }))?;
                    n_failed += 1;
                }
            }
        }
        out.flush()?;
        errors.flush()?;
    }
    drop(out);

    let n_described = done_ids.len() + n_new;
    let complete = n_described == records.len();
    if complete {
        // resumed runs append out of order; restore the corpus order
        let mut by_id: HashMap<String, CorpusRecord> =
            described_so_far(&path)?.into_iter().map(|r| (r.table.id().to_string(), r)).collect();
        let ordered: Vec<String> = records.iter().map(|r| write_record(&by_id.remove(r.table.id()).expect("complete"))).collect();
        write_lines(&path, ordered)?;
    }
    Ok(json!({
        "n_tables": records.len(),
        "n_described": n_described,
        "n_new": n_new,
        "n_failed": n_failed,
        "complete": complete,
        "output": path,
    }))
}

pub fn generate_pairs(cfg: &RunConfig) -> Result<Value> {
    let anchors = load_tables(&cfg.corpus)?;
    let provider: Box<dyn ChatProvider> = cfg.chat_provider().build()?;
    let gen_cfg = GenerationConfig { n_targets: cfg.n_targets, seed: cfg.seed, workers: cfg.workers };
    let out = generate(provider.as_ref(), &anchors, &gen_cfg);
    let mut w = create(&out_file(cfg, "pairs.jsonl"))?;
    out.write_pairs(&mut w)?;
    w.flush()?;
    let mut w = create(&out_file(cfg, "generated.jsonl"))?;
    out.write_targets(&mut w)?;
    w.flush()?;
    let mut w = create(&out_file(cfg, "generation_log.jsonl"))?;
    out.write_log(&mut w)?;
    w.flush()?;
    Ok(json!({
        "n_anchors": anchors.len(),
        "n_pairs": out.pairs().len(),
        "n_rejected": out.n_rejected(),
        "output": cfg.out,
    }))
}

pub fn split(cfg: &RunConfig, pairs: &Option<PathBuf>) -> Result<Value> {
    let pairs = read_pairs(&or_out(pairs, cfg, "pairs.jsonl"))?;
    let anchors: Vec<String> = group_pairs(&pairs).into_iter().map(|(a, _)| a).collect();
    let split = split_dataset(&anchors, &cfg.split_ratios()?, cfg.seed)?;
    write_json(&out_file(cfg, "split.json"), &split)?;
    let parts = [("train", &split.train), ("validation", &split.validation), ("test", &split.test)];
    let mut counts = serde_json::Map::new();
    for (i, (name, ids)) in parts.iter().enumerate() {
        let lines: Vec<&str> = pairs.iter().filter(|(p, _)| split.part_of(&p.anchor_id) == Some(i)).map(|(_, l)| l.as_str()).collect();
        write_lines(&out_file(cfg, &format!("pairs_{name}.jsonl")), &lines)?;
        counts.insert(name.to_string(), json!({ "anchors": ids.len(), "pairs": lines.len() }));
    }
    Ok(Value::Object(counts))
}

fn pair_set(pairs: &[(PairLine, String)]) -> Result<PairSet> {
    Ok(PairSet::from_pairs(pairs.iter().map(|(p, _)| (p.anchor_id.clone(), p.target_id.clone())))?)
}

fn unordered(p: &PairLine) -> (String, String) {
    if p.anchor_id <= p.target_id {
        (p.anchor_id.clone(), p.target_id.clone())
    } else {
        (p.target_id.clone(), p.anchor_id.clone())
    }
}

pub fn audit(cfg: &RunConfig, train_path: &Option<PathBuf>, test_path: &Option<PathBuf>, pairs_path: &Option<PathBuf>, repair: bool) -> Result<Value> {
    let report = if repair {
        let Some(path) = pairs_path else { return Err(usage("--repair needs --pairs")) };
        let pairs = read_pairs(path)?;
        let (train, test) = leakage_free_split(&pair_set(&pairs)?, cfg.train_fraction, cfg.seed)?;
        for (name, side) in [("repaired_train.jsonl", &train), ("repaired_test.jsonl", &test)] {
            let lines = pairs.iter().filter(|(p, _)| {
                let (a, b) = unordered(p);
                side.contains(&a, &b)
            });
            write_lines(&out_file(cfg, name), lines.map(|(_, l)| l.as_str()))?;
        }
        transitive_leakage(&train, &test)
    } else {
        let (Some(train), Some(test)) = (train_path, test_path) else { return Err(usage("audit needs --train and --test, or --pairs with --repair")) };
        transitive_leakage(&pair_set(&read_pairs(train)?)?, &pair_set(&read_pairs(test)?)?)
    };
    write_json(&out_file(cfg, "leakage_report.json"), &report)?;
    Ok(serde_json::to_value(&report)?)
}

fn embedder(cfg: &RunConfig) -> Result<Box<dyn Embedder<f64>>> {
    Ok(cfg.embed_provider().build::<f64>()?)
}

pub fn mine(cfg: &RunConfig, pairs: &Option<PathBuf>) -> Result<Value> {
    let tables = load_tables(&cfg.corpus)?;
    let groups = group_pairs(&read_pairs(&or_out(pairs, cfg, "pairs_train.jsonl"))?);
    let view = cfg.view();
    let dense = build_index::<f64>(&tables, embedder(cfg)?.as_ref(), &view)?;
    let lexical = Bm25Index::from_texts(tables.iter().map(|t| (t.id().to_string(), view.text(t))));
    let anchors: Vec<(String, BTreeSet<String>)> = groups.into_iter().map(|(a, ts)| (a, ts.into_iter().collect())).collect();
    let mined = mine_all(&anchors, &dense, &lexical, &cfg.mining())?;
    let mut w = create(&out_file(cfg, "negatives.jsonl"))?;
    write_negatives(&mined, &mut w)?;
    w.flush()?;
    Ok(json!({ "n_anchors": mined.len(), "n_negatives": mined.iter().map(|m| m.negative_ids.len()).sum::<usize>() }))
}

pub fn train_model(cfg: &RunConfig, negatives: &Option<PathBuf>, checkpoint: &Option<PathBuf>) -> Result<Value> {
    let tables = load_tables(&cfg.corpus)?;
    let view = cfg.view();
    let texts: HashMap<&str, String> = tables.iter().map(|t| (t.id(), view.text(t))).collect();
    let text = |id: &str| texts.get(id).cloned().with_context(|| format!("table `{id}` is not in the corpus"));
    let records = read_negatives(&read_text(&or_out(negatives, cfg, "negatives.jsonl"))?).context("parsing negatives")?;
    let mut samples = Vec::new();
    for r in &records {
        let negatives = r.negative_ids.iter().map(|n| text(n)).collect::<Result<Vec<_>>>()?;
        for p in &r.positive_ids {
            samples.push(TrainSample { anchor: text(&r.anchor_id)?, positive: text(p)?, negatives: negatives.clone() });
        }
    }
    let init = ProjectionModel::<f64>::random(cfg.dimension, cfg.d_out, cfg.tau, cfg.hash_seed, cfg.seed);
    let (model, losses) = if cfg.epochs == 0 {
        (init, Vec::new())
    } else {
        let outcome = train(init, &samples, &cfg.training())?;
        (outcome.model, outcome.epoch_losses)
    };
    let path = or_out(checkpoint, cfg, "model.ckpt");
    let mut w = create(&path)?;
    write_checkpoint(&model, &mut w)?;
    w.flush()?;
    Ok(json!({ "n_samples": samples.len(), "epoch_losses": losses, "checkpoint": path }))
}

fn text_index(tables: &[Table], enc: &dyn Embedder<f64>) -> Result<Index<f64>> {
    let texts: Vec<String> = tables.iter().map(serialize_title_description).collect();
    let vectors = enc.embed_batch(&texts)?;
    let entries = tables.iter().zip(vectors).map(|(t, vector)| IndexEntry { table_id: t.id().to_string(), vector }).collect();
    Ok(Index::new(entries)?)
}

pub fn eval(cfg: &RunConfig, pairs: &Option<PathBuf>, checkpoint: &Option<PathBuf>, fused: bool) -> Result<Value> {
    let tables = load_tables(&cfg.corpus)?;
    let queries: Vec<Query> = group_pairs(&read_pairs(&or_out(pairs, cfg, "pairs_test.jsonl"))?)
        .into_iter()
        .map(|(id, relevant)| Query { id, relevant })
        .collect();
    let enc: Box<dyn Embedder<f64>> = match checkpoint {
        Some(p) => {
            let f = fs::File::open(p).with_context(|| format!("opening checkpoint {}", p.display()))?;
            Box::new(read_checkpoint::<f64, _>(std::io::BufReader::new(f))?)
        }
        None => embedder(cfg)?,
    };
    let view = cfg.view();
    let structural = build_index(&tables, enc.as_ref(), &view)?;
    let report = if fused {
        let index = FusedIndex::new(structural, text_index(&tables, enc.as_ref())?, cfg.fusion_weight)?;
        evaluate_with(&queries, &cfg.k, |q, depth| {
            for r in &q.relevant {
                if !index.structural.contains(r) {
                    return Err(RetrievalError::MissingId(r.clone()));
                }
            }
            index.top_k(&q.id, depth)
        })?
    } else {
        evaluate(&structural, &queries, &cfg.k)?
    };
    fs::create_dir_all(&cfg.out)?;
    fs::write(out_file(cfg, "report.json"), report.to_json())?;
    let mut w = create(&out_file(cfg, "report.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(json!({ "n_queries": report.n_queries, "aggregates": report.aggregates }))
}

pub fn simdist(cfg: &RunConfig, pairs: &Option<PathBuf>, random_pairs: usize) -> Result<Value> {
    let tables = load_tables(&cfg.corpus)?;
    let by_id: HashMap<&str, &Table> = tables.iter().map(|t| (t.id(), t)).collect();
    let lookup = |id: &str| by_id.get(id).map(|t| (*t).clone()).with_context(|| format!("table `{id}` is not in the corpus"));
    let generated: Vec<(Table, Table)> = read_pairs(&or_out(pairs, cfg, "pairs.jsonl"))?
        .iter()
        .map(|(p, _)| Ok((lookup(&p.anchor_id)?, lookup(&p.target_id)?)))
        .collect::<Result<_>>()?;
    if random_pairs > 0 && tables.len() < 2 {
        bail!("--random-pairs needs at least two tables");
    }
    let n = tables.len() as u64;
    let random: Vec<(Table, Table)> = (0..random_pairs as u64)
        .map(|i| {
            let a = seed::derive(cfg.seed, 2 * i) % n;
            let mut b = seed::derive(cfg.seed, 2 * i + 1) % (n - 1);
            if b >= a {
                b += 1;
            }
            (tables[a as usize].clone(), tables[b as usize].clone())
        })
        .collect();
    let enc = embedder(cfg)?;
    let view: TextView = cfg.view();
    let mut summary = serde_json::Map::new();
    for (name, set) in [("pairs", &generated), ("random", &random)] {
        if set.is_empty() {
            continue;
        }
        let dist = similarity_distribution(set, enc.as_ref(), &view)?;
        let mut w = create(&out_file(cfg, &format!("simdist_{name}.csv")))?;
        dist.write_csv(&mut w)?;
        w.flush()?;
        summary.insert(name.into(), serde_json::to_value(&dist.summary)?);
    }
    write_json(&out_file(cfg, "simdist.json"), &summary)?;
    Ok(Value::Object(summary))
}
