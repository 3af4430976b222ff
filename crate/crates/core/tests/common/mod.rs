//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cemine_core::classifier::LabeledText;
use cemine_core::lexicon::AdasCategory;
use cemine_core::tagger::Lattice;
use cemine_core::taxonomy::{CategorizedInstance, CauseCategory, EffectCategory};
use cemine_core::{AnnotatedSentence, Source, Tag};

// ---------------------------------------------------------------- CRF oracles

pub fn random_lattice(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Lattice {
    let mut v = || rng.gen_range(-scale..scale);
    Lattice {
        emissions: (0..n).map(|_| [v(), v(), v()]).collect(),
        transition: [[v(), v(), v()], [v(), v(), v()], [v(), v(), v()]],
        start: [v(), v(), v()],
        stop: [v(), v(), v()],
    }
}

/// Every tag sequence of length `n`, in lexicographic C < E < O order.
pub fn all_sequences(n: usize) -> Vec<Vec<Tag>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                Tag::ALL.iter().map(move |&t| {
                    let mut p = prefix.clone();
                    p.push(t);
                    p
                })
            })
            .collect();
    }
    out
}

/// Start + emissions + transitions + stop, written out from the definition.
pub fn oracle_score(l: &Lattice, tags: &[Tag]) -> f64 {
    let idx: Vec<usize> = tags.iter().map(|t| t.index()).collect();
    let mut s = l.start[idx[0]] + l.stop[idx[idx.len() - 1]];
    for (t, &y) in idx.iter().enumerate() {
        s += l.emissions[t][y];
    }
    for w in idx.windows(2) {
        s += l.transition[w[0]][w[1]];
    }
    s
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub struct BruteForce {
    pub log_partition: f64,
    pub best_score: f64,
    pub unary: Vec<[f64; 3]>,
    pub pairwise: Vec<[[f64; 3]; 3]>,
}

pub fn brute_force(l: &Lattice) -> BruteForce {
    let n = l.emissions.len();
    let seqs = all_sequences(n);
    let scores: Vec<f64> = seqs.iter().map(|s| oracle_score(l, s)).collect();
    let log_partition = log_sum_exp(scores.iter().copied());
    let mut unary = vec![[0.0; 3]; n];
    let mut pairwise = vec![[[0.0; 3]; 3]; n.saturating_sub(1)];
    for (seq, s) in seqs.iter().zip(&scores) {
        let p = (s - log_partition).exp();
        for (t, y) in seq.iter().enumerate() {
            unary[t][y.index()] += p;
        }
        for (t, w) in seq.windows(2).enumerate() {
            pairwise[t][w[0].index()][w[1].index()] += p;
        }
    }
    BruteForce {
        log_partition,
        best_score: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        unary,
        pairwise,
    }
}

pub fn random_tags(rng: &mut ChaCha8Rng, n: usize) -> Vec<Tag> {
    (0..n).map(|_| Tag::from_index(rng.gen_range(0..3))).collect()
}

// ------------------------------------------------------------ metric oracle

pub struct RationalMetrics {
    pub precision: Ratio<u64>,
    pub recall: Ratio<u64>,
    pub f1: Ratio<u64>,
}

/// P, R and the harmonic mean 2PR/(P+R) in exact arithmetic; zero when undefined.
pub fn rational_metrics(tp: u64, fp: u64, fn_: u64) -> RationalMetrics {
    let zero = Ratio::from_integer(0);
    let ratio = |a: u64, b: u64| if b == 0 { zero } else { Ratio::new(a, b) };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == zero {
        zero
    } else {
        Ratio::from_integer(2) * precision * recall / (precision + recall)
    };
    RationalMetrics { precision, recall, f1 }
}

pub fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// ------------------------------------------------------- template corpus

pub struct Fillers {
    pub nouns: &'static [&'static str],
    pub cause_verbs: &'static [&'static str],
    pub adjectives: &'static [&'static str],
    pub subjects: &'static [&'static str],
    pub effect_verbs: &'static [&'static str],
    pub adverbs: &'static [&'static str],
}

pub const TRAIN_FILLERS: Fillers = Fillers {
    nouns: &[
        "radar", "camera", "sensor", "module", "battery", "software", "computer", "system", "lens", "screen",
        "harness", "fuse", "controller", "unit",
    ],
    cause_verbs: &["failed", "malfunctioned", "froze", "glitched", "cracked", "died", "shorted", "disconnected"],
    adjectives: &["faulty", "dirty", "broken", "defective", "bad", "loose"],
    subjects: &["car", "vehicle", "truck", "suv", "sedan"],
    effect_verbs: &["swerved", "braked", "stopped", "stalled", "crashed", "drifted", "slowed", "shook"],
    adverbs: &["suddenly", "abruptly", "violently", "hard", "again"],
};

/// No word here occurs in [`TRAIN_FILLERS`].
pub const HELDOUT_FILLERS: Fillers = Fillers {
    nouns: &["lidar", "processor", "antenna", "bracket", "relay", "gateway", "display", "actuator"],
    cause_verbs: &["overheated", "rebooted", "corroded", "jammed"],
    adjectives: &["worn", "damaged", "cheap"],
    subjects: &["van", "wagon", "crossover", "minivan"],
    effect_verbs: &["lurched", "skidded", "veered", "halted"],
    adverbs: &["unexpectedly", "sharply", "twice"],
};

enum Order {
    CauseFirst,
    EffectFirst,
}

/// (leading words, words between the two phrases, order).
const CONNECTIVES: &[(&[&str], &[&str], Order)] = &[
    (&[], &["caused"], Order::CauseFirst),
    (&[], &["led", "to"], Order::CauseFirst),
    (&[], &["resulted", "in"], Order::CauseFirst),
    (&[], &[",", "so"], Order::CauseFirst),
    (&[], &[",", "as", "a", "result"], Order::CauseFirst),
    (&["due", "to"], &[","], Order::CauseFirst),
    (&["because"], &[","], Order::CauseFirst),
    (&[], &["because"], Order::EffectFirst),
    (&[], &["due", "to"], Order::EffectFirst),
    (&[], &["after"], Order::EffectFirst),
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn cause_phrase(rng: &mut ChaCha8Rng, f: &Fillers) -> Vec<String> {
    match rng.gen_range(0..3) {
        0 => vec!["the", pick(rng, f.nouns), pick(rng, f.cause_verbs)],
        1 => vec!["a", pick(rng, f.adjectives), pick(rng, f.nouns)],
        _ => vec!["the", pick(rng, f.adjectives), pick(rng, f.nouns), pick(rng, f.cause_verbs)],
    }
    .into_iter()
    .map(String::from)
    .collect()
}

fn effect_phrase(rng: &mut ChaCha8Rng, f: &Fillers) -> Vec<String> {
    let mut p = vec!["the".to_string(), pick(rng, f.subjects).to_string(), pick(rng, f.effect_verbs).to_string()];
    if rng.gen_bool(0.5) {
        p.push(pick(rng, f.adverbs).to_string());
    }
    p
}

/// Cause-connective-effect sentences tagged C/E with connectives and
/// punctuation as O.
pub fn template_corpus(n: usize, fillers: &Fillers, rng: &mut ChaCha8Rng) -> Vec<AnnotatedSentence> {
    (0..n)
        .map(|i| {
            let (lead, mid, order) = &CONNECTIVES[rng.gen_range(0..CONNECTIVES.len())];
            let cause = cause_phrase(rng, fillers);
            let effect = effect_phrase(rng, fillers);
            let (first, first_tag, second, second_tag) = match order {
                Order::CauseFirst => (cause, Tag::C, effect, Tag::E),
                Order::EffectFirst => (effect, Tag::E, cause, Tag::C),
            };
            let mut tokens = Vec::new();
            let mut tags = Vec::new();
            let mut push = |words: &[String], tag: Tag| {
                for w in words {
                    tokens.push(w.clone());
                    tags.push(tag);
                }
            };
            let owned = |ws: &[&str]| ws.iter().map(|s| s.to_string()).collect::<Vec<_>>();
            push(&owned(lead), Tag::O);
            push(&first, first_tag);
            push(&owned(mid), Tag::O);
            push(&second, second_tag);
            push(&[".".to_string()], Tag::O);
            AnnotatedSentence::new(format!("t{i}"), tokens, tags, Source::Synthetic).unwrap()
        })
        .collect()
}

// ----------------------------------------------------- taxonomy fixtures

/// The ten most frequent cause/effect pairs over 1141 complaints.
pub const TABLE5_PAIRS: [(CauseCategory, EffectCategory, u64); 10] = [
    (CauseCategory::Unknown, EffectCategory::AdasFailure, 87),
    (CauseCategory::FalseAlarm, EffectCategory::HardBraking, 85),
    (CauseCategory::FailToRespond, EffectCategory::Collision, 46),
    (CauseCategory::Unknown, EffectCategory::WarningAlert, 40),
    (CauseCategory::Recall, EffectCategory::RepairUnavailable, 24),
    (CauseCategory::FalseAlarm, EffectCategory::UnintendedBraking, 22),
    (CauseCategory::FalseAlarm, EffectCategory::WarningAlert, 21),
    (CauseCategory::InattentiveDriving, EffectCategory::Collision, 19),
    (CauseCategory::Unknown, EffectCategory::ErrorMessage, 18),
    (CauseCategory::SensorIssue, EffectCategory::AdasFailure, 17),
];

pub const TABLE5_PERCENTAGES: [f64; 10] = [7.6, 7.4, 4.0, 3.5, 2.1, 1.9, 1.8, 1.7, 1.6, 1.5];

pub const TABLE5_TOTAL: u64 = 1141;

fn instance(id: usize, system: Option<AdasCategory>, c: CauseCategory, e: EffectCategory) -> CategorizedInstance {
    CategorizedInstance {
        complaint_id: format!("{id}"),
        adas_category: system,
        causes: BTreeSet::from([c]),
        effects: BTreeSet::from([e]),
    }
}

/// Single-pair instances: the listed pairs with their counts, then filler
/// spread over other pairs with at most `filler_cap` each until `total`.
fn pair_fixture(
    pairs: &[(CauseCategory, EffectCategory, u64)],
    total: u64,
    filler_cap: u64,
    system: Option<AdasCategory>,
) -> Vec<CategorizedInstance> {
    let mut out = Vec::new();
    for &(c, e, n) in pairs {
        for _ in 0..n {
            out.push(instance(out.len(), system, c, e));
        }
    }
    let taken: BTreeSet<(CauseCategory, EffectCategory)> = pairs.iter().map(|p| (p.0, p.1)).collect();
    let mut filler = CauseCategory::ALL
        .iter()
        .flat_map(|&c| EffectCategory::ALL.iter().map(move |&e| (c, e)))
        .filter(|p| !taken.contains(p));
    while (out.len() as u64) < total {
        let (c, e) = filler.next().expect("enough filler pairs");
        let n = filler_cap.min(total - out.len() as u64);
        for _ in 0..n {
            out.push(instance(out.len(), system, c, e));
        }
    }
    out
}

pub fn table5_fixture() -> Vec<CategorizedInstance> {
    pair_fixture(&TABLE5_PAIRS, TABLE5_TOTAL, 16, None)
}

/// Forward collision avoidance complaints: 87 instances whose effect
/// counts are 24/16/10/10/7 for the leading five, each remaining effect at
/// most 6; causes follow 36/16/13/10/5 with the rest at most 4.
pub const FCA_TOTAL: u64 = 87;

pub const FCA_EFFECTS: [(EffectCategory, u64, f64); 5] = [
    (EffectCategory::RepairUnavailable, 24, 27.6),
    (EffectCategory::HardBraking, 16, 18.4),
    (EffectCategory::AdasFailure, 10, 11.5),
    (EffectCategory::WarningAlert, 10, 11.5),
    (EffectCategory::UnintendedBraking, 7, 8.0),
];

pub const FCA_CAUSES: [(CauseCategory, u64, f64); 5] = [
    (CauseCategory::Recall, 36, 41.4),
    (CauseCategory::FalseAlarm, 16, 18.4),
    (CauseCategory::Unknown, 13, 14.9),
    (CauseCategory::FailToRespond, 10, 11.5),
    (CauseCategory::SensorIssue, 5, 5.7),
];

fn fill(listed: Vec<u64>, total: u64, cap: u64) -> Vec<u64> {
    let mut counts = listed;
    let mut left = total - counts.iter().sum::<u64>();
    while left > 0 {
        let n = cap.min(left);
        counts.push(n);
        left -= n;
    }
    counts
}

pub fn fca_fixture() -> Vec<CategorizedInstance> {
    let system = Some(AdasCategory::ForwardCollisionAvoidance);
    let listed_effects: Vec<EffectCategory> = FCA_EFFECTS.iter().map(|e| e.0).collect();
    let other_effects = EffectCategory::ALL.iter().copied().filter(|e| !listed_effects.contains(e));
    let effects: Vec<EffectCategory> = listed_effects.iter().copied().chain(other_effects).collect();
    let effect_counts = fill(FCA_EFFECTS.iter().map(|e| e.1).collect(), FCA_TOTAL, 6);

    let listed_causes: Vec<CauseCategory> = FCA_CAUSES.iter().map(|c| c.0).collect();
    let other_causes = CauseCategory::ALL.iter().copied().filter(|c| !listed_causes.contains(c));
    let causes: Vec<CauseCategory> = listed_causes.iter().copied().chain(other_causes).collect();
    let cause_counts = fill(FCA_CAUSES.iter().map(|c| c.1).collect(), FCA_TOTAL, 4);

    let expand = |counts: &[u64]| -> Vec<usize> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize))
            .collect()
    };
    expand(&cause_counts)
        .into_iter()
        .zip(expand(&effect_counts))
        .enumerate()
        .map(|(id, (c, e))| instance(id, system, causes[c], effects[e]))
        .collect()
}

// ----------------------------------------------------- keyword fixtures

pub const CARRIERS: &[&str] = &[
    "While driving on the highway the {} kicked in and the car braked.",
    "{} was engaged when the vehicle drifted.",
    "I reported that the {}, which was on, did nothing.",
    "THE DEALER SAID THE {} NEEDS AN UPDATE",
];

/// Each contains a lexicon phrase only as part of a longer word.
pub const NEAR_MISSES: &[&str] = &[
    "the autopilots on this fleet were fine",
    "my neighbor is an autopilotist",
    "the superautopilot feature never shipped",
    "the automatic brakings were smooth",
    "the automatic brakingsystem is not the issue",
    "their emergency braking systems are fine",
    "we compared intelligent braking systems",
    "the adaptive cruise controller was replaced",
    "the super cruisers club met downtown",
    "my smart cruise controls are fine",
    "the lane keep assistant light is on",
    "automatic steerings are a new idea",
    "the power steering assistance pump leaked",
    "the copilot assisted landing was smooth",
    "forward collision avoidances were logged",
    "the blind spot assistance mirror cracked",
    "pedestrian detections were logged",
    "driver monitorings were reviewed",
    "advanced driver assistance systems are common",
    "the automated drivingschool car was parked",
];

// ------------------------------------------------- classifier fixtures

const POS_WORDS: &[&str] = &[
    "autopilot", "radar", "lane", "assist", "cruise", "adaptive", "sensor", "camera", "collision", "warning",
    "steering", "braking", "emergency", "alert", "beeped", "phantom", "detection", "blind", "spot", "engaged",
];
const NEG_WORDS: &[&str] = &[
    "transmission", "seatbelt", "airbag", "paint", "window", "door", "latch", "fuel", "tank", "exhaust",
    "muffler", "tire", "rim", "heater", "blower", "wiper", "trunk", "hood", "rust", "odor",
];

fn sentence(rng: &mut ChaCha8Rng, words: &[&str]) -> String {
    let n = rng.gen_range(6..14);
    (0..n).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Positives and negatives drawn from disjoint vocabularies.
pub fn separable_corpus(positives: usize, negatives: usize, rng: &mut ChaCha8Rng) -> Vec<LabeledText> {
    let mut out = Vec::with_capacity(positives + negatives);
    for i in 0..positives {
        out.push(LabeledText {
            id: format!("p{i}"),
            text: sentence(rng, POS_WORDS),
            adas: true,
        });
    }
    for i in 0..negatives {
        out.push(LabeledText {
            id: format!("n{i}"),
            text: sentence(rng, NEG_WORDS),
            adas: false,
        });
    }
    out.shuffle(rng);
    out
}
