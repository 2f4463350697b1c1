//! Template generator for small transitive-sentence corpora with SBN
//! meaning representations, balanced between active and passive voice.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tfa::{RolePair, Voice, VoiceType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Animal,
    Insect,
    Person,
    Name,
    Institution,
    Writing,
    Building,
    Place,
}

struct Noun {
    synset: &'static str,
    singular: &'static str,
    plural: &'static str,
    class: Class,
}

const fn noun(synset: &'static str, singular: &'static str, plural: &'static str, class: Class) -> Noun {
    Noun {
        synset,
        singular,
        plural,
        class,
    }
}

const NOUNS: &[Noun] = &[
    noun("wolf.n.01", "wolf", "wolves", Class::Animal),
    noun("dog.n.01", "dog", "dogs", Class::Animal),
    noun("cat.n.01", "cat", "cats", Class::Animal),
    noun("sheep.n.01", "sheep", "sheep", Class::Animal),
    noun("fox.n.01", "fox", "foxes", Class::Animal),
    noun("horse.n.01", "horse", "horses", Class::Animal),
    noun("bear.n.01", "bear", "bears", Class::Animal),
    noun("bee.n.01", "bee", "bees", Class::Insect),
    noun("wasp.n.01", "wasp", "wasps", Class::Insect),
    noun("man.n.01", "man", "men", Class::Person),
    noun("woman.n.01", "woman", "women", Class::Person),
    noun("boy.n.01", "boy", "boys", Class::Person),
    noun("girl.n.01", "girl", "girls", Class::Person),
    noun("farmer.n.01", "farmer", "farmers", Class::Person),
    noun("teacher.n.01", "teacher", "teachers", Class::Person),
    noun("soldier.n.01", "soldier", "soldiers", Class::Person),
    noun("company.n.01", "company", "companies", Class::Institution),
    noun("school.n.01", "school", "schools", Class::Institution),
    noun("club.n.02", "club", "clubs", Class::Institution),
    noun("museum.n.01", "museum", "museums", Class::Institution),
    noun("book.n.01", "book", "books", Class::Writing),
    noun("letter.n.01", "letter", "letters", Class::Writing),
    noun("song.n.01", "song", "songs", Class::Writing),
    noun("poem.n.01", "poem", "poems", Class::Writing),
    noun("house.n.01", "house", "houses", Class::Building),
    noun("bridge.n.01", "bridge", "bridges", Class::Building),
    noun("wall.n.01", "wall", "walls", Class::Building),
    noun("tower.n.01", "tower", "towers", Class::Building),
    noun("village.n.01", "village", "villages", Class::Place),
    noun("city.n.01", "city", "cities", Class::Place),
    noun("farm.n.01", "farm", "farms", Class::Place),
    noun("army.n.01", "army", "armies", Class::Place),
];

const NAMES: &[(&str, &str)] = &[
    ("male.n.02", "Tom"),
    ("female.n.02", "Mary"),
    ("male.n.02", "John"),
    ("female.n.02", "Anna"),
    ("male.n.02", "Peter"),
    ("female.n.02", "Lucy"),
    ("male.n.02", "Taro"),
    ("female.n.02", "Emma"),
];

const ADJECTIVES: &[&str] = &["old", "young", "big", "small", "black", "white"];

const NUMBERS: &[(u32, &str)] = &[(2, "two"), (3, "three"), (4, "four")];

struct Verb {
    pair: RolePair,
    synset: &'static str,
    past: &'static str,
    participle: &'static str,
    agents: &'static [Class],
    objects: &'static [Class],
}

const ANIMATE: &[Class] = &[Class::Animal, Class::Person, Class::Name];
const HUMAN: &[Class] = &[Class::Person, Class::Name];

const VERBS: &[Verb] = &[
    Verb { pair: RolePair::Patient, synset: "kill.v.01", past: "killed", participle: "killed", agents: ANIMATE, objects: ANIMATE },
    Verb { pair: RolePair::Patient, synset: "bite.v.01", past: "bit", participle: "bitten", agents: &[Class::Animal], objects: ANIMATE },
    Verb { pair: RolePair::Patient, synset: "chase.v.01", past: "chased", participle: "chased", agents: ANIMATE, objects: ANIMATE },
    Verb { pair: RolePair::Theme, synset: "found.v.01", past: "founded", participle: "founded", agents: HUMAN, objects: &[Class::Institution] },
    Verb { pair: RolePair::Theme, synset: "see.v.01", past: "saw", participle: "seen", agents: HUMAN, objects: &[Class::Animal, Class::Person, Class::Name, Class::Building] },
    Verb { pair: RolePair::Experiencer, synset: "sting.v.01", past: "stung", participle: "stung", agents: &[Class::Insect], objects: ANIMATE },
    Verb { pair: RolePair::Experiencer, synset: "scare.v.01", past: "scared", participle: "scared", agents: ANIMATE, objects: HUMAN },
    Verb { pair: RolePair::Result, synset: "write.v.01", past: "wrote", participle: "written", agents: HUMAN, objects: &[Class::Writing] },
    Verb { pair: RolePair::Result, synset: "build.v.01", past: "built", participle: "built", agents: HUMAN, objects: &[Class::Building] },
    Verb { pair: RolePair::Source, synset: "desert.v.01", past: "deserted", participle: "deserted", agents: HUMAN, objects: &[Class::Place, Class::Person, Class::Name] },
    Verb { pair: RolePair::Source, synset: "leave.v.01", past: "left", participle: "left", agents: HUMAN, objects: &[Class::Place] },
];

/// A noun phrase with its SBN lines (head first) and surface.
#[derive(Debug, Clone)]
struct Phrase {
    lines: Vec<String>,
    surface: String,
    plural: bool,
    head: String,
}

fn phrase(rng: &mut ChaCha8Rng, classes: &[Class], avoid: Option<&str>) -> Phrase {
    loop {
        let class = *classes.choose(rng).expect("non-empty class list");
        let p = if class == Class::Name {
            let (synset, name) = *NAMES.choose(rng).unwrap();
            Phrase {
                lines: vec![format!("{synset} Name \"{name}\"")],
                surface: name.to_string(),
                plural: false,
                head: name.to_string(),
            }
        } else {
            let candidates: Vec<&Noun> = NOUNS.iter().filter(|n| n.class == class).collect();
            let n = *candidates.choose(rng).unwrap();
            let plural = rng.gen_bool(0.25);
            let adjective = rng.gen_bool(0.3).then(|| *ADJECTIVES.choose(rng).unwrap());
            let mut head_line = n.synset.to_string();
            let mut words = Vec::new();
            if plural {
                let (k, word) = *NUMBERS.choose(rng).unwrap();
                head_line.push_str(&format!(" Quantity {k}"));
                words.push(word.to_string());
            } else {
                words.push("the".to_string());
            }
            let mut lines = vec![head_line];
            if let Some(adj) = adjective {
                lines.push(format!("{adj}.a.01 AttributeOf -1"));
                words.push(adj.to_string());
            }
            words.push(if plural { n.plural } else { n.singular }.to_string());
            Phrase {
                lines,
                surface: words.join(" "),
                plural,
                head: n.synset.to_string(),
            }
        };
        if Some(p.head.as_str()) != avoid {
            return p;
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One generated sentence and its meaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub id: String,
    pub sbn: String,
    pub reference: String,
    pub voice: VoiceType,
}

fn render(id: String, verb: &Verb, agent: &Phrase, other: &Phrase, voice: Voice) -> SyntheticPair {
    let (subject, object, subject_role, object_role) = match voice {
        Voice::Passive => (other, agent, verb.pair.role(), "Agent"),
        _ => (agent, other, "Agent", verb.pair.role()),
    };
    let mut sbn = String::new();
    for l in &subject.lines {
        writeln!(sbn, "{l}").unwrap();
    }
    writeln!(
        sbn,
        "{} {subject_role} -{} Time +1 {object_role} +2",
        verb.synset,
        subject.lines.len()
    )
    .unwrap();
    writeln!(sbn, "time.n.08 TPR now").unwrap();
    for l in &object.lines {
        writeln!(sbn, "{l}").unwrap();
    }
    let reference = match voice {
        Voice::Passive => format!(
            "{} {} {} by {}.",
            capitalize(&subject.surface),
            if subject.plural { "were" } else { "was" },
            verb.participle,
            object.surface
        ),
        _ => format!("{} {} {}.", capitalize(&subject.surface), verb.past, object.surface),
    };
    SyntheticPair {
        id,
        sbn,
        reference,
        voice: VoiceType {
            voice,
            pair: Some(verb.pair),
        },
    }
}

/// `n` pairs alternating active/passive and cycling through the five role
/// pairs; deterministic per seed.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<SyntheticPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let voice = if i % 2 == 0 { Voice::Active } else { Voice::Passive };
            let pair = RolePair::ALL[(i / 2) % RolePair::ALL.len()];
            let verbs: Vec<&Verb> = VERBS.iter().filter(|v| v.pair == pair).collect();
            let verb = *verbs.choose(&mut rng).unwrap();
            let agent = phrase(&mut rng, verb.agents, None);
            let other = phrase(&mut rng, verb.objects, Some(&agent.head));
            render(format!("s{i:04}"), verb, &agent, &other, voice)
        })
        .collect()
}

/// Writes `sbn/<id>.sbn` files and a `manifest.tsv` with inline references.
/// Returns the manifest path.
pub fn write_corpus(dir: &Path, pairs: &[SyntheticPair]) -> io::Result<PathBuf> {
    let sbn_dir = dir.join("sbn");
    fs::create_dir_all(&sbn_dir)?;
    let mut manifest = String::from("# sbn_path\treference\n");
    for p in pairs {
        fs::write(sbn_dir.join(format!("{}.sbn", p.id)), &p.sbn)?;
        writeln!(manifest, "sbn/{}.sbn\t{}", p.id, p.reference).unwrap();
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest)?;
    Ok(path)
}
