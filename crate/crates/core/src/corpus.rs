//! Corpus file IO (UTF-8, one document per line) and a deterministic
//! synthetic corpus generator.
//!
//! The generator composes template sentences from a fixed word inventory with
//! Zipf-like word frequencies. It exists so the bench can train and evaluate
//! at megabyte scale without shipping or downloading external text; output is
//! a pure function of the seed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Read a corpus file, skipping blank lines.
pub fn read_corpus(path: &Path) -> Result<Vec<String>> {
    let data = fs::read_to_string(path)?;
    let lines: Vec<String> = data
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.to_string())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(lines)
}

pub fn write_corpus(path: &Path, docs: &[String]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(doc);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

const DETERMINERS: &[&str] = &[
    "the", "a", "this", "that", "each", "every", "some", "any", "no", "another", "its", "their",
];

const PRONOUNS: &[&str] = &[
    "it", "he", "she", "they", "we", "you", "one", "someone", "everyone", "nobody",
];

const PREPOSITIONS: &[&str] = &[
    "of", "in", "to", "on", "at", "by", "with", "from", "into", "over", "under", "through",
    "near", "against", "across", "along", "within", "behind", "beyond", "during",
];

const CONJUNCTIONS: &[&str] = &[
    "and", "but", "or", "so", "yet", "while", "because", "although",
];

const ADVERBS: &[&str] = &[
    "often", "never", "always", "soon", "slowly", "quickly", "almost", "nearly", "again",
    "still", "already", "carefully", "quietly", "suddenly", "together", "twice", "once",
    "perhaps", "certainly", "rarely", "gently", "eagerly", "calmly", "eventually", "finally",
    "early", "late", "everywhere", "somewhere", "instead",
];

const NOUNS: &[&str] = &[
    "river", "mountain", "forest", "village", "city", "road", "bridge", "house", "garden",
    "field", "market", "harbor", "ship", "boat", "train", "station", "tower", "castle", "wall",
    "gate", "door", "window", "roof", "floor", "room", "kitchen", "table", "chair", "lamp",
    "candle", "book", "letter", "paper", "map", "coin", "key", "lock", "box", "basket",
    "bottle", "glass", "plate", "knife", "spoon", "bread", "cheese", "apple", "pear", "plum",
    "grape", "wheat", "corn", "rice", "tea", "coffee", "milk", "honey", "salt", "sugar",
    "water", "fire", "smoke", "stone", "rock", "sand", "clay", "iron", "copper", "silver",
    "gold", "wood", "leaf", "branch", "root", "tree", "oak", "pine", "willow", "flower",
    "rose", "grass", "moss", "fern", "bird", "crow", "owl", "hawk", "swallow", "wren",
    "fish", "trout", "salmon", "whale", "seal", "horse", "mare", "colt", "cow", "calf",
    "sheep", "lamb", "goat", "pig", "dog", "hound", "cat", "kitten", "mouse", "rat", "fox",
    "wolf", "bear", "deer", "hare", "rabbit", "squirrel", "badger", "otter", "farmer",
    "miller", "baker", "smith", "weaver", "sailor", "soldier", "hunter", "shepherd",
    "merchant", "doctor", "teacher", "student", "child", "boy", "girl", "man", "woman",
    "friend", "neighbor", "stranger", "king", "queen", "prince", "duke", "knight", "squire",
    "servant", "guest", "crowd", "family", "morning", "evening", "night", "day", "week",
    "month", "year", "season", "spring", "summer", "autumn", "winter", "rain", "snow",
    "wind", "storm", "cloud", "fog", "mist", "frost", "ice", "sun", "moon", "star", "sky",
    "dawn", "dusk", "shadow", "light", "darkness", "sound", "voice", "song", "music",
    "story", "tale", "word", "name", "number", "hour", "minute", "moment", "journey",
    "path", "trail", "track", "corner", "edge", "middle", "center", "side", "top", "bottom",
    "end", "beginning", "part", "piece", "half", "quarter", "pair", "group", "line", "row",
    "circle", "square", "shape", "color", "size", "weight", "valley", "hill", "meadow",
    "pond", "lake", "shore", "coast", "island", "cliff", "cave", "mine", "well", "fountain",
    "mill", "barn", "stable", "fence", "hedge", "orchard", "vineyard", "harvest", "seed",
    "crop", "tool", "hammer", "nail", "rope", "ladder", "wheel", "cart", "wagon", "saddle",
    "blanket", "cloak", "coat", "boot", "hat", "glove", "ring", "crown", "sword", "shield",
    "arrow", "bow", "net", "hook", "bell", "drum", "flute", "fiddle", "dance", "feast",
    "fair", "festival", "wedding", "gift", "prize", "secret", "promise", "question",
    "answer", "reason", "thought", "idea", "dream", "memory", "hope", "fear", "joy",
    "sorrow", "anger", "peace", "war", "battle", "victory", "defeat", "law", "rule",
    "custom", "habit", "trade", "craft", "skill", "lesson", "school", "church", "temple",
    "palace", "cottage", "hut", "tent", "camp", "fortress", "border", "kingdom", "land",
    "country", "world", "nation", "people", "crowd", "army", "fleet", "crew", "herd",
    "flock", "swarm", "nest", "den", "burrow", "web", "feather", "fur", "horn", "hoof",
    "claw", "tail", "wing", "beak", "scale", "shell", "bone", "skin", "heart", "mind",
    "hand", "finger", "arm", "shoulder", "head", "face", "eye", "ear", "nose", "mouth",
    "foot", "knee", "back", "hair", "smile", "laugh", "tear", "breath", "step", "walk",
    "ride", "sail", "flight", "hunt", "catch", "meal", "supper", "breakfast", "dinner",
];

const VERBS: &[&str] = &[
    "walked", "ran", "jumped", "climbed", "crossed", "followed", "carried", "lifted",
    "dropped", "pushed", "pulled", "opened", "closed", "built", "broke", "mended",
    "planted", "harvested", "gathered", "scattered", "found", "lost", "kept", "gave",
    "took", "brought", "sent", "received", "bought", "sold", "traded", "counted",
    "measured", "weighed", "cut", "tied", "wrapped", "filled", "emptied", "poured",
    "mixed", "cooked", "baked", "ate", "drank", "tasted", "smelled", "touched", "held",
    "watched", "saw", "heard", "listened", "spoke", "said", "told", "asked", "answered",
    "called", "whispered", "shouted", "sang", "played", "worked", "rested", "slept",
    "woke", "dreamed", "remembered", "forgot", "learned", "taught", "read", "wrote",
    "drew", "painted", "visited", "left", "arrived", "returned", "stayed", "waited",
    "hurried", "wandered", "traveled", "sailed", "rowed", "rode", "drove", "flew",
    "swam", "fished", "hunted", "chased", "caught", "escaped", "hid", "searched",
    "discovered", "noticed", "studied", "examined", "repaired", "cleaned", "washed",
    "dried", "folded", "hung", "moved", "turned", "stopped", "started", "finished",
    "continued", "began", "ended", "changed", "grew", "faded", "shone", "glowed",
    "burned", "froze", "melted", "rose", "fell", "stood", "sat", "lay", "leaned",
    "crawled", "drifted", "floated", "settled", "rolled", "slipped", "stumbled",
    "rushed", "paused", "lingered", "departed", "guarded", "defended", "protected",
    "rescued", "greeted", "thanked", "warned", "promised", "refused", "agreed",
    "argued", "decided", "chose", "preferred", "admired", "praised", "blamed",
];

const ADJECTIVES: &[&str] = &[
    "old", "young", "new", "ancient", "small", "large", "tiny", "huge", "tall", "short",
    "long", "wide", "narrow", "deep", "shallow", "high", "low", "heavy", "dark", "bright",
    "pale", "dim", "warm", "cold", "cool", "hot", "dry", "wet", "damp", "fresh", "stale",
    "sweet", "sour", "bitter", "salty", "ripe", "green", "red", "blue", "yellow", "white",
    "black", "brown", "gray", "golden", "purple", "quiet", "loud", "silent", "calm",
    "wild", "rough", "smooth", "soft", "hard", "sharp", "dull", "clean", "dirty", "tidy",
    "empty", "full", "distant", "far", "close", "quick", "slow", "swift", "steady",
    "careful", "careless", "clever", "wise", "foolish", "brave", "timid", "proud",
    "humble", "kind", "cruel", "honest", "patient", "busy", "idle", "rich", "poor",
    "famous", "hidden", "strange", "familiar", "common", "rare", "simple", "plain",
    "fancy", "crooked", "straight", "round", "flat", "steep", "gentle", "fierce",
    "hungry", "thirsty", "tired", "weary", "cheerful", "gloomy", "pleasant", "bitter",
];

/// Draw from a word class with a mild tilt toward the front of the list:
/// 60% of the time the minimum of two uniform picks, otherwise uniform.
fn zipf_pick<'a>(words: &[&'a str], rng: &mut SplitMix64) -> &'a str {
    let n = words.len() as u64;
    let a = rng.next_below(n);
    let pick = if rng.next_f64() < 0.6 {
        a.min(rng.next_below(n))
    } else {
        a
    };
    words[pick as usize]
}

fn maybe<'a>(words: &[&'a str], p: f64, rng: &mut SplitMix64) -> Option<&'a str> {
    (rng.next_f64() < p).then(|| zipf_pick(words, rng))
}

fn sentence(rng: &mut SplitMix64, out: &mut Vec<String>) {
    let template = rng.next_below(7);
    let mut push = |w: &str| out.push(w.to_string());
    match template {
        0 => {
            push(zipf_pick(DETERMINERS, rng));
            if let Some(adj) = maybe(ADJECTIVES, 0.5, rng) {
                push(adj);
            }
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(PREPOSITIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            if let Some(adj) = maybe(ADJECTIVES, 0.4, rng) {
                push(adj);
            }
            push(zipf_pick(NOUNS, rng));
        }
        1 => {
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            if rng.next_f64() < 0.5 {
                push(zipf_pick(PREPOSITIONS, rng));
                push(zipf_pick(DETERMINERS, rng));
                push(zipf_pick(NOUNS, rng));
            }
        }
        2 => {
            push(zipf_pick(PRONOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(DETERMINERS, rng));
            if let Some(adj) = maybe(ADJECTIVES, 0.6, rng) {
                push(adj);
            }
            push(zipf_pick(NOUNS, rng));
            push(",");
            push(zipf_pick(CONJUNCTIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(ADVERBS, rng));
        }
        3 => {
            push(zipf_pick(ADVERBS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(",");
            push(zipf_pick(CONJUNCTIONS, rng));
            push(zipf_pick(PRONOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
        }
        4 => {
            push(zipf_pick(DETERMINERS, rng));
            if let Some(adj) = maybe(ADJECTIVES, 0.5, rng) {
                push(adj);
            }
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(PREPOSITIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(ADVERBS, rng));
        }
        5 => {
            push(zipf_pick(PRONOUNS, rng));
            push(zipf_pick(ADVERBS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(PREPOSITIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            if let Some(adj) = maybe(ADJECTIVES, 0.5, rng) {
                push(adj);
            }
            push(zipf_pick(NOUNS, rng));
        }
        _ => {
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(CONJUNCTIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
            push(zipf_pick(VERBS, rng));
            push(zipf_pick(PREPOSITIONS, rng));
            push(zipf_pick(DETERMINERS, rng));
            push(zipf_pick(NOUNS, rng));
        }
    }
    out.push(".".into());
}

/// Deterministic synthetic corpus: `n_docs` documents of several template
/// sentences each, one document per line when written out.
pub fn synthetic_corpus(seed: u64, n_docs: usize) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    let mut docs = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let sentences = 4 + rng.next_below(5);
        let mut tokens: Vec<String> = Vec::new();
        for _ in 0..sentences {
            sentence(&mut rng, &mut tokens);
        }
        docs.push(tokens.join(" "));
    }
    docs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::NGramModel;

    #[test]
    fn synthetic_corpus_is_deterministic() {
        let a = synthetic_corpus(7, 50);
        let b = synthetic_corpus(7, 50);
        let c = synthetic_corpus(8, 50);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn synthetic_corpus_trains_a_rich_vocabulary() {
        let docs = synthetic_corpus(3, 400);
        let model = NGramModel::train(&docs, 3, 0.1).unwrap();
        assert!(model.vocab_size() > 100, "vocab {}", model.vocab_size());
    }

    #[test]
    fn corpus_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        let docs = synthetic_corpus(1, 10);
        write_corpus(&path, &docs).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back, docs);
    }

    #[test]
    fn empty_corpus_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "\n\n").unwrap();
        assert!(matches!(read_corpus(&path), Err(Error::EmptyCorpus)));
    }
}
