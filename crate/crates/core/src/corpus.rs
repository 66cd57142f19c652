//! Corpus ingestion: CoNLL-U treebanks, sentiment lexica, lemma maps, and
//! seeded train/validation/test splits.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>, lemma: Option<&str>) -> Self {
        Token {
            form: form.into(),
            lemma: lemma.map(str::to_owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    /// Document or author subset tag, e.g. `Horace`.
    pub group: Option<String>,
    pub tokens: Vec<Token>,
    pub raw_text: Option<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            id: id.into(),
            group: None,
            tokens,
            raw_text: None,
        }
    }
}

/// Ordered sentences with pairwise-distinct ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    source: String,
}

impl Corpus {
    pub fn new(source: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            if s.tokens.is_empty() {
                return Err(Error::invalid(format!("sentence `{}` has no tokens", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus {
            sentences,
            source: source.into(),
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Concatenates corpora in order; ids must stay unique across all parts.
    pub fn concat(parts: impl IntoIterator<Item = Corpus>) -> Result<Self> {
        let mut sources = Vec::new();
        let mut sentences = Vec::new();
        for part in parts {
            sources.push(part.source);
            sentences.extend(part.sentences);
        }
        Corpus::new(sources.join("+"), sentences)
    }

    /// Fills in absent lemmata from a form-to-lemma map.
    pub fn with_lemma_map(&self, map: &LemmaMap) -> Corpus {
        let sentences = self
            .sentences
            .iter()
            .map(|s| {
                let tokens = s
                    .tokens
                    .iter()
                    .map(|t| match &t.lemma {
                        Some(_) => t.clone(),
                        None => Token {
                            form: t.form.clone(),
                            lemma: map.get(&t.form).map(str::to_owned),
                        },
                    })
                    .collect();
                Sentence { tokens, ..s.clone() }
            })
            .collect();
        Corpus {
            sentences,
            source: self.source.clone(),
        }
    }

    fn subset(&self, label: &str, indices: &[usize]) -> Corpus {
        Corpus {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            source: format!("{}#{label}", self.source),
        }
    }
}

/// Parses CoNLL-U text. Only the ID, FORM and LEMMA columns are read.
///
/// Recognised comments: `sent_id`, `text`, `newdoc id` (sets the group of
/// the following sentences) and `group` (overrides it for one sentence).
pub fn parse_conllu(input: impl BufRead, source: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    let mut doc_group: Option<String> = None;
    let mut pending = PendingSentence::default();

    let mut finish =
        |pending: &mut PendingSentence, doc_group: &Option<String>, sentences: &mut Vec<Sentence>| -> Result<()> {
            let p = std::mem::take(pending);
            if p.tokens.is_empty() {
                return Ok(());
            }
            let id = p.id.unwrap_or_else(|| format!("{source}:{}", sentences.len() + 1));
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            sentences.push(Sentence {
                id,
                group: p.group.or_else(|| doc_group.clone()),
                tokens: p.tokens,
                raw_text: p.text,
            });
            Ok(())
        };

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);

        if line.trim().is_empty() {
            finish(&mut pending, &doc_group, &mut sentences)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim().to_owned();
                match key.trim() {
                    "sent_id" => pending.id = Some(value),
                    "text" => pending.text = Some(value),
                    "group" => pending.group = Some(value),
                    "newdoc id" => doc_group = Some(value),
                    _ => {}
                }
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if id.parse::<u32>().is_err() {
            return Err(Error::parse(source, line_no, format!("bad token id `{id}`")));
        }
        if cols[1].is_empty() {
            return Err(Error::parse(source, line_no, "empty FORM column"));
        }
        let lemma = match cols[2] {
            "_" | "" => None,
            l => Some(l.to_owned()),
        };
        pending.tokens.push(Token {
            form: cols[1].to_owned(),
            lemma,
        });
    }
    finish(&mut pending, &doc_group, &mut sentences)?;

    Ok(Corpus {
        sentences,
        source: source.to_owned(),
    })
}

#[derive(Default)]
struct PendingSentence {
    id: Option<String>,
    text: Option<String>,
    group: Option<String>,
    tokens: Vec<Token>,
}

/// Writes a minimal CoNLL-U rendering (ID, FORM, LEMMA; other columns `_`).
pub fn write_conllu(corpus: &Corpus, mut out: impl Write) -> Result<()> {
    let mut current_group: Option<&str> = None;
    for s in corpus.sentences() {
        if let Some(g) = s.group.as_deref() {
            if current_group != Some(g) {
                writeln!(out, "# newdoc id = {g}")?;
                current_group = Some(g);
            }
        }
        writeln!(out, "# sent_id = {}", s.id)?;
        if let Some(text) = &s.raw_text {
            writeln!(out, "# text = {text}")?;
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let lemma = t.lemma.as_deref().unwrap_or("_");
            writeln!(out, "{}\t{}\t{}\t_\t_\t_\t_\t_\t_\t_", i + 1, t.form, lemma)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Lemma to sentiment score in `[-1, 1]`. Keys are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

impl Lexicon {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
        for (lemma, score) in entries {
            let lemma = lemma.as_ref().trim();
            if lemma.is_empty() {
                return Err(Error::invalid("empty lemma"));
            }
            check_score(score).map_err(Error::invalid)?;
            let slot = sums.entry(lemma.to_lowercase()).or_insert((0.0, 0));
            slot.0 += score;
            slot.1 += 1;
        }
        Ok(Lexicon::from_sums(sums))
    }

    fn from_sums(sums: HashMap<String, (f64, usize)>) -> Self {
        let entries = sums
            .into_iter()
            .map(|(k, (sum, n))| (k, (sum / n as f64).clamp(-1.0, 1.0)))
            .collect();
        Lexicon { entries }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(&key.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn check_score(score: f64) -> std::result::Result<(), String> {
    if (-1.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(format!("score {score} outside [-1, 1]"))
    }
}

/// Reads `lemma<TAB>score` lines. Repeated lemmata are averaged.
pub fn load_lexicon(input: impl BufRead) -> Result<Lexicon> {
    const SRC: &str = "lexicon";
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let lemma = cols.next().unwrap_or("").trim();
        let Some(raw) = cols.next() else {
            return Err(Error::parse(SRC, line_no, "missing score column"));
        };
        if lemma.is_empty() {
            return Err(Error::parse(SRC, line_no, "empty lemma"));
        }
        let score: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::parse(SRC, line_no, format!("non-numeric score `{raw}`")))?;
        check_score(score).map_err(|m| Error::parse(SRC, line_no, m))?;
        let slot = sums.entry(lemma.to_lowercase()).or_insert((0.0, 0));
        slot.0 += score;
        slot.1 += 1;
    }
    Ok(Lexicon::from_sums(sums))
}

/// Form to lemma, keyed by lowercase form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaMap {
    entries: HashMap<String, String>,
}

impl LemmaMap {
    pub fn get(&self, form: &str) -> Option<&str> {
        self.entries.get(&form.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `form<TAB>lemma` lines. Later lines override earlier ones.
pub fn load_lemma_map(input: impl BufRead) -> Result<LemmaMap> {
    const SRC: &str = "lemma map";
    let mut entries = HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((form, lemma)) if !form.trim().is_empty() && !lemma.trim().is_empty() => {
                entries.insert(form.trim().to_lowercase(), lemma.trim().to_owned());
            }
            _ => return Err(Error::parse(SRC, idx + 1, "expected `form<TAB>lemma`")),
        }
    }
    Ok(LemmaMap { entries })
}

/// Lemma first, then the lowercased surface form.
pub fn lookup_score(lexicon: &Lexicon, token: &Token) -> Option<f64> {
    token
        .lemma
        .as_deref()
        .and_then(|l| lexicon.get(l))
        .or_else(|| lexicon.get(&token.form))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    /// `floor(0.8 n)`, `ceil(0.1 n)`, remainder. Exact integer arithmetic.
    pub fn for_len(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(format!(
                "cannot split {n} item(s) into train/validation/test"
            )));
        }
        let train = n * 8 / 10;
        let validation = n.div_ceil(10);
        Ok(SplitSizes {
            train,
            validation,
            test: n - train - validation,
        })
    }
}

/// Seeded permutation of `0..n` cut into train/validation/test index lists.
pub fn split_indices(n: usize, seed: u64) -> Result<[Vec<usize>; 3]> {
    let sizes = SplitSizes::for_len(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    seed::shuffle(&mut order, &mut seed::rng_from_seed(seed));
    let test = order.split_off(sizes.train + sizes.validation);
    let validation = order.split_off(sizes.train);
    Ok([order, validation, test])
}

pub fn split_dataset(corpus: &Corpus, seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let [train, validation, test] = split_indices(corpus.len(), seed)?;
    Ok((
        corpus.subset("train", &train),
        corpus.subset("validation", &validation),
        corpus.subset("test", &test),
    ))
}
