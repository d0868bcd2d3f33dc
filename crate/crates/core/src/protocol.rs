//! Multipath XOR key transport over a routing scheme.
//!
//! The first node draws one key `K_i` per route and the session key is
//! `K = ⊕ K_i`. Each link `(a, b)` carries one message: the route keys of its
//! bundle, concatenated in ascending route order and XORed with a keystream
//! expanded from the link's QKD key `k_ab`. Every relay decrypts what it
//! receives, regroups the keys by next hop and re-encrypts. The last node
//! decrypts its incoming messages and recombines.
//!
//! The keystream's first `key_len` bits are `k_ab` itself; further bits come
//! from SHA-256 in counter mode over `k_ab`. This is a simulation stand-in
//! for "enough QKD key material", not a security construction.

use std::collections::{BTreeMap, BTreeSet};

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::routes::RoutingScheme;
use crate::simulator::CompromiseScenario;
use crate::topology::{Link, NetworkSegment};

pub type Bits = BitVec<u8, Msb0>;

/// Packs bits MSB-first into bytes, zero-padding the last byte.
pub fn bits_to_bytes(bits: &BitSlice<u8, Msb0>) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, bit) in bits.iter().by_vals().enumerate() {
        if bit {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

pub fn bits_from_bytes(bytes: &[u8], len: usize) -> Result<Bits> {
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::MalformedTranscript(format!(
            "{} payload bytes for {len} bits",
            bytes.len()
        )));
    }
    let mut bits = Bits::from_slice(bytes);
    if bits[len..].any() {
        return Err(Error::MalformedTranscript("nonzero padding bits".into()));
    }
    bits.truncate(len);
    Ok(bits)
}

pub fn bits_hex(bits: &BitSlice<u8, Msb0>) -> String {
    hex::encode(bits_to_bytes(bits))
}

fn random_bits(rng: &mut impl Rng, len: usize) -> Bits {
    (0..len).map(|_| rng.gen::<bool>()).collect()
}

/// `len` keystream bits derived from a link key.
fn keystream(link: &Link, key: &BitSlice<u8, Msb0>, len: usize) -> Bits {
    let mut out: Bits = key.iter().by_vals().take(len).collect();
    let key_bytes = bits_to_bytes(key);
    let mut counter: u64 = 0;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(b"qkdnet/keystream/v1");
        h.update((link.from as u64).to_be_bytes());
        h.update((link.to as u64).to_be_bytes());
        h.update((key.len() as u64).to_be_bytes());
        h.update(&key_bytes);
        h.update(counter.to_be_bytes());
        let block = h.finalize();
        let need = len - out.len();
        out.extend(block.view_bits::<Msb0>().iter().by_vals().take(need));
        counter += 1;
    }
    out
}

fn xor_in_place(target: &mut Bits, other: &BitSlice<u8, Msb0>) {
    for (mut a, b) in target.iter_mut().zip(other.iter().by_vals()) {
        let v = *a ^ b;
        a.set(v);
    }
}

/// XOR of all keys; all must share one length.
pub fn xor_all<'a>(keys: impl IntoIterator<Item = &'a Bits>, key_len: usize) -> Bits {
    let mut acc = bitvec![u8, Msb0; 0; key_len];
    for k in keys {
        xor_in_place(&mut acc, k);
    }
    acc
}

/// Link keys `k_ij` and route keys `K_i` of one session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionKeys {
    pub link_keys: BTreeMap<Link, Bits>,
    /// `route_keys[i - 1]` is `K_i`.
    pub route_keys: Vec<Bits>,
    pub key_len: usize,
}

impl SessionKeys {
    /// The keys a node shares over its incident links.
    pub fn keys_of_node(&self, node: usize) -> BTreeMap<Link, Bits> {
        self.link_keys
            .iter()
            .filter(|(l, _)| l.from == node || l.to == node)
            .map(|(l, k)| (*l, k.clone()))
            .collect()
    }
}

/// One encrypted bundle on one link. The route-index header travels in the
/// clear as routing instructions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub link: Link,
    pub route_indices: Vec<usize>,
    pub ciphertext: Bits,
}

impl Message {
    /// Big-endian, length-prefixed layout:
    /// `from:u32 to:u32 count:u32 index:u32*count bits:u32 payload`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [self.link.from, self.link.to, self.route_indices.len()] {
            out.extend((v as u32).to_be_bytes());
        }
        for &i in &self.route_indices {
            out.extend((i as u32).to_be_bytes());
        }
        out.extend((self.ciphertext.len() as u32).to_be_bytes());
        out.extend(bits_to_bytes(&self.ciphertext));
        out
    }

    /// Parses one message, returning it and the unread tail.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Message, &[u8])> {
        let mut rest = bytes;
        let take_u32 = |rest: &mut &[u8]| -> Result<usize> {
            if rest.len() < 4 {
                return Err(Error::MalformedTranscript("truncated header".into()));
            }
            let (head, tail) = rest.split_at(4);
            *rest = tail;
            Ok(u32::from_be_bytes(head.try_into().expect("4 bytes")) as usize)
        };
        let from = take_u32(&mut rest)?;
        let to = take_u32(&mut rest)?;
        let count = take_u32(&mut rest)?;
        if count > rest.len() / 4 {
            return Err(Error::MalformedTranscript("route count exceeds message".into()));
        }
        let route_indices = (0..count)
            .map(|_| take_u32(&mut rest))
            .collect::<Result<Vec<_>>>()?;
        let bits = take_u32(&mut rest)?;
        let payload = bits.div_ceil(8);
        if rest.len() < payload {
            return Err(Error::MalformedTranscript("truncated payload".into()));
        }
        let (body, tail) = rest.split_at(payload);
        let ciphertext = bits_from_bytes(body, bits)?;
        Ok((
            Message {
                link: Link::new(from, to),
                route_indices,
                ciphertext,
            },
            tail,
        ))
    }

    pub fn digest(&self) -> String {
        let h = Sha256::digest(bits_to_bytes(&self.ciphertext));
        hex::encode(&h[..8])
    }
}

impl Serialize for Message {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            from: usize,
            to: usize,
            routes: &'a [usize],
            bits: usize,
            ciphertext: String,
        }
        Wire {
            from: self.link.from,
            to: self.link.to,
            routes: &self.route_indices,
            bits: self.ciphertext.len(),
            ciphertext: bits_hex(&self.ciphertext),
        }
        .serialize(s)
    }
}

/// Messages in ascending link order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SessionTranscript {
    pub messages: Vec<Message>,
}

impl SessionTranscript {
    pub fn message(&self, link: &Link) -> Option<&Message> {
        self.messages.iter().find(|m| m.link == *link)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.messages.len() as u32).to_be_bytes().to_vec();
        for m in &self.messages {
            out.extend(m.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::MalformedTranscript("missing message count".into()));
        }
        let count = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        let mut rest = &bytes[4..];
        let mut messages = Vec::new();
        for _ in 0..count {
            let (m, tail) = Message::from_bytes(rest)?;
            messages.push(m);
            rest = tail;
        }
        if !rest.is_empty() {
            return Err(Error::MalformedTranscript("trailing bytes".into()));
        }
        Ok(Self { messages })
    }

    /// Flips one ciphertext bit; for fault-injection tests and demos.
    pub fn flip_bit(&mut self, message: usize, bit: usize) -> bool {
        match self.messages.get_mut(message) {
            Some(m) if bit < m.ciphertext.len() => {
                let v = !m.ciphertext[bit];
                m.ciphertext.set(bit, v);
                true
            }
            _ => false,
        }
    }
}

/// Output of one session run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub keys: SessionKeys,
    pub transcript: SessionTranscript,
    pub final_key: Bits,
}

fn encrypt_bundle(link: &Link, link_key: &Bits, bundle: &[usize], route_keys: &BTreeMap<usize, Bits>) -> Result<Message> {
    let mut plain = Bits::new();
    for i in bundle {
        let k = route_keys.get(i).ok_or_else(|| {
            Error::Inconsistency(format!("node {} must forward K_{i} it never received", link.from))
        })?;
        plain.extend_from_bitslice(k);
    }
    let stream = keystream(link, link_key, plain.len());
    xor_in_place(&mut plain, &stream);
    Ok(Message {
        link: *link,
        route_indices: bundle.to_vec(),
        ciphertext: plain,
    })
}

/// Decrypts a message and splits it back into `(route index, K_i)` pairs.
fn decrypt_bundle(msg: &Message, link_key: &Bits, key_len: usize) -> Result<Vec<(usize, Bits)>> {
    let expect = msg.route_indices.len() * key_len;
    if msg.ciphertext.len() != expect {
        return Err(Error::MalformedTranscript(format!(
            "message on {} has {} bits, expected {expect}",
            msg.link,
            msg.ciphertext.len()
        )));
    }
    let mut plain = msg.ciphertext.clone();
    xor_in_place(&mut plain, &keystream(&msg.link, link_key, expect));
    Ok(msg
        .route_indices
        .iter()
        .zip(plain.chunks(key_len.max(1)))
        .map(|(&i, chunk)| (i, chunk.to_bitvec()))
        .collect())
}

/// Runs one key-transport session with keys drawn from `seed`.
pub fn run_session(seg: &NetworkSegment, scheme: &RoutingScheme, key_len: usize, seed: u64) -> Result<Session> {
    if scheme.segment != *seg {
        return Err(Error::SchemeMismatch);
    }
    if key_len == 0 {
        return Err(Error::param("key_len", key_len, "key_len >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let link_keys: BTreeMap<Link, Bits> = seg
        .edges()
        .into_iter()
        .map(|l| (l, random_bits(&mut rng, key_len)))
        .collect();
    let route_keys: Vec<Bits> = (0..scheme.route_count())
        .map(|_| random_bits(&mut rng, key_len))
        .collect();
    let keys = SessionKeys {
        link_keys,
        route_keys,
        key_len,
    };
    let transcript = relay(seg, scheme, &keys)?;
    let final_key = xor_all(&keys.route_keys, key_len);
    Ok(Session {
        keys,
        transcript,
        final_key,
    })
}

/// Produces the transcript by letting every node forward what it decrypted.
fn relay(seg: &NetworkSegment, scheme: &RoutingScheme, keys: &SessionKeys) -> Result<SessionTranscript> {
    let n = seg.n_nodes();
    // held[v]: route keys node v has decrypted so far.
    let mut held: Vec<BTreeMap<usize, Bits>> = vec![BTreeMap::new(); n + 1];
    held[1] = keys
        .route_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (i + 1, k.clone()))
        .collect();
    let mut messages = Vec::with_capacity(scheme.per_link_bundles.len());
    for node in 1..n {
        for (link, bundle) in scheme.outgoing(node) {
            let link_key = &keys.link_keys[link];
            let msg = encrypt_bundle(link, link_key, bundle, &held[node])?;
            for (i, k) in decrypt_bundle(&msg, link_key, keys.key_len)? {
                held[link.to].insert(i, k);
            }
            messages.push(msg);
        }
    }
    Ok(SessionTranscript { messages })
}

/// The last node's view: decrypts every message addressed to it with its
/// own link keys and XORs the recovered route keys.
pub fn reconstruct_at_endpoint(
    seg: &NetworkSegment,
    scheme: &RoutingScheme,
    transcript: &SessionTranscript,
    link_keys_of_last_node: &BTreeMap<Link, Bits>,
) -> Result<Bits> {
    if scheme.segment != *seg {
        return Err(Error::SchemeMismatch);
    }
    let mut recovered: BTreeMap<usize, Bits> = BTreeMap::new();
    let mut key_len = None;
    for link in seg.sink_links() {
        let bundle = scheme.bundle(&link);
        if bundle.is_empty() {
            continue;
        }
        let mut on_link = transcript.messages.iter().filter(|m| m.link == link);
        let msg = on_link
            .next()
            .ok_or_else(|| Error::MalformedTranscript(format!("no message on {link}")))?;
        if on_link.next().is_some() {
            return Err(Error::MalformedTranscript(format!("duplicate message on {link}")));
        }
        if msg.route_indices != bundle {
            return Err(Error::MalformedTranscript(format!(
                "routing header on {link} disagrees with the scheme"
            )));
        }
        let link_key = link_keys_of_last_node
            .get(&link)
            .ok_or_else(|| Error::MalformedTranscript(format!("no key for {link}")))?;
        if *key_len.get_or_insert(link_key.len()) != link_key.len() {
            return Err(Error::MalformedTranscript("link keys differ in length".into()));
        }
        for (i, k) in decrypt_bundle(msg, link_key, link_key.len())? {
            if recovered.insert(i, k).is_some() {
                return Err(Error::MalformedTranscript(format!("K_{i} arrived twice")));
            }
        }
    }
    let total = scheme.route_count();
    if recovered.len() != total || recovered.keys().copied().ne(1..=total) {
        return Err(Error::MalformedTranscript(format!(
            "recovered {} of {total} route keys",
            recovered.len()
        )));
    }
    Ok(xor_all(recovered.values(), key_len.unwrap_or(0)))
}

/// What an adversary learns from a scenario: every bundle on an intercepted
/// link or on any link incident to a compromised node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryView {
    pub known_nodes: BTreeSet<usize>,
    pub known_links: BTreeSet<Link>,
    pub recovered_route_keys: BTreeSet<usize>,
    pub total_routes: usize,
}

impl AdversaryView {
    pub fn knows_final_key(&self) -> bool {
        self.recovered_route_keys.len() == self.total_routes
    }
}

pub fn adversary_view(
    seg: &NetworkSegment,
    scheme: &RoutingScheme,
    transcript: &SessionTranscript,
    scenario: &CompromiseScenario,
) -> Result<AdversaryView> {
    if scheme.segment != *seg {
        return Err(Error::SchemeMismatch);
    }
    let mut known_links = scenario.intercepted_links.clone();
    for &node in &scenario.compromised_nodes {
        known_links.extend(
            seg.edges()
                .into_iter()
                .filter(|l| l.from == node || l.to == node),
        );
    }
    let recovered_route_keys = transcript
        .messages
        .iter()
        .filter(|m| known_links.contains(&m.link))
        .flat_map(|m| m.route_indices.iter().copied())
        .collect();
    Ok(AdversaryView {
        known_nodes: scenario.compromised_nodes.clone(),
        known_links,
        recovered_route_keys,
        total_routes: scheme.route_count(),
    })
}

/// Actually decrypts the adversary's messages with the link keys it holds;
/// returns the session key if every `K_i` was recovered.
pub fn adversary_final_key(
    view: &AdversaryView,
    keys: &SessionKeys,
    transcript: &SessionTranscript,
) -> Result<Option<Bits>> {
    let mut recovered: BTreeMap<usize, Bits> = BTreeMap::new();
    for msg in transcript.messages.iter().filter(|m| view.known_links.contains(&m.link)) {
        let link_key = keys
            .link_keys
            .get(&msg.link)
            .ok_or_else(|| Error::MalformedTranscript(format!("no key for {}", msg.link)))?;
        recovered.extend(decrypt_bundle(msg, link_key, keys.key_len)?);
    }
    if recovered.len() == view.total_routes {
        Ok(Some(xor_all(recovered.values(), keys.key_len)))
    } else {
        Ok(None)
    }
}
