//! Domain types for blocksworld scenes, moves and move sequences, together
//! with the bit-level encodings consumed by the learned sequencers.
//!
//! A [`Configuration`] is an ordered list of stacks (bottom to top) plus the
//! set of blocks that were moved out of the scene. Moves follow the
//! `move(X, Y, t)` grammar: a colored subject, a destination that is another
//! block, the table or "out", and a time step in `0..8`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Maximum number of blocks standing in a scene.
pub const MAX_BLOCKS: usize = 5;
/// Maximum number of stacks (grid columns).
pub const MAX_STACKS: usize = 5;
/// Maximum number of moves in a sequence.
pub const MAX_MOVES: usize = 8;
/// Width of one encoded move.
pub const MOVE_BITS: usize = 16;
/// Width of one encoded sequence.
pub const SEQUENCE_BITS: usize = MOVE_BITS * MAX_MOVES;
/// Width of the per-configuration feature vector (25 arrangement + 15 color bits).
pub const CONFIG_FEATURES: usize = 40;
/// Width of the (source, target) feature vector.
pub const PAIR_FEATURES: usize = 2 * CONFIG_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Color {
    R = 1,
    G = 2,
    B = 3,
    Y = 4,
    O = 5,
    P = 6,
}

impl Color {
    pub const ALL: [Color; 6] = [Color::R, Color::G, Color::B, Color::Y, Color::O, Color::P];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// 3-bit code; equal to the id, so `000` never names a color.
    pub fn code(self) -> u8 {
        self.id()
    }

    /// Zero-based position, used for one-hot layouts and bitmasks.
    pub fn index(self) -> usize {
        self.id() as usize - 1
    }

    pub fn from_id(id: u8) -> Option<Color> {
        Color::ALL.get((id as usize).wrapping_sub(1)).copied()
    }

    pub fn letter(self) -> char {
        match self {
            Color::R => 'R',
            Color::G => 'G',
            Color::B => 'B',
            Color::Y => 'Y',
            Color::O => 'O',
            Color::P => 'P',
        }
    }

    pub fn from_letter(c: char) -> Option<Color> {
        Color::ALL.into_iter().find(|col| col.letter() == c)
    }

    fn mask(self) -> u8 {
        1 << self.index()
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Where a moved block ends up. The derived order is: blocks by id, then
/// table, then out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Destination {
    Block(Color),
    Table,
    Out,
}

impl Destination {
    pub const ALL: [Destination; 8] = [
        Destination::Block(Color::R),
        Destination::Block(Color::G),
        Destination::Block(Color::B),
        Destination::Block(Color::Y),
        Destination::Block(Color::O),
        Destination::Block(Color::P),
        Destination::Table,
        Destination::Out,
    ];

    /// Position inside the 8-wide one-hot group.
    pub fn slot(self) -> usize {
        match self {
            Destination::Block(c) => c.index(),
            Destination::Table => 6,
            Destination::Out => 7,
        }
    }

    pub fn from_slot(slot: usize) -> Option<Destination> {
        Destination::ALL.get(slot).copied()
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Block(c) => write!(f, "{c}"),
            Destination::Table => f.write_str("table"),
            Destination::Out => f.write_str("out"),
        }
    }
}

impl FromStr for Destination {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Destination::Table),
            "out" => Ok(Destination::Out),
            _ => {
                let mut chars = s.chars();
                match (chars.next().and_then(Color::from_letter), chars.next()) {
                    (Some(c), None) => Ok(Destination::Block(c)),
                    _ => Err(ParseError::new(0, format!("unknown destination {s:?}"))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("color {0} appears more than once")]
    DuplicateColor(Color),
    #[error("{0} blocks on the table, at most {MAX_BLOCKS} allowed")]
    TooManyBlocks(usize),
    #[error("{0} stacks, at most {MAX_STACKS} allowed")]
    TooManyStacks(usize),
    #[error("stack {0} is empty")]
    EmptyStack(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(pos: usize, msg: impl Into<String>) -> Self {
        ParseError { pos, msg: msg.into() }
    }
}

/// Symbolic scene: stacks left to right, each bottom to top, plus the out set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    stacks: Vec<Vec<Color>>,
    out: BTreeSet<Color>,
}

impl Configuration {
    pub fn new(stacks: Vec<Vec<Color>>, out: BTreeSet<Color>) -> Result<Self, ConfigError> {
        let mut seen = 0u8;
        let mut blocks = 0;
        for (i, stack) in stacks.iter().enumerate() {
            if stack.is_empty() {
                return Err(ConfigError::EmptyStack(i));
            }
            for &c in stack {
                if seen & c.mask() != 0 {
                    return Err(ConfigError::DuplicateColor(c));
                }
                seen |= c.mask();
                blocks += 1;
            }
        }
        for &c in &out {
            if seen & c.mask() != 0 {
                return Err(ConfigError::DuplicateColor(c));
            }
            seen |= c.mask();
        }
        if blocks > MAX_BLOCKS {
            return Err(ConfigError::TooManyBlocks(blocks));
        }
        if stacks.len() > MAX_STACKS {
            return Err(ConfigError::TooManyStacks(stacks.len()));
        }
        Ok(Configuration { stacks, out })
    }

    /// Stacks only, nothing out.
    pub fn from_stacks(stacks: Vec<Vec<Color>>) -> Result<Self, ConfigError> {
        Self::new(stacks, BTreeSet::new())
    }

    pub fn empty() -> Self {
        Configuration { stacks: Vec::new(), out: BTreeSet::new() }
    }

    /// Caller guarantees the invariants (used by the transition function).
    pub(crate) fn from_parts_unchecked(stacks: Vec<Vec<Color>>, out: BTreeSet<Color>) -> Self {
        debug_assert!(Self::new(stacks.clone(), out.clone()).is_ok());
        Configuration { stacks, out }
    }

    pub fn stacks(&self) -> &[Vec<Color>] {
        &self.stacks
    }

    pub fn out(&self) -> &BTreeSet<Color> {
        &self.out
    }

    pub fn block_count(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    /// Bitmask (bit `index()`) of colors standing in stacks.
    pub fn stack_mask(&self) -> u8 {
        self.stacks.iter().flatten().fold(0, |m, c| m | c.mask())
    }

    pub fn out_mask(&self) -> u8 {
        self.out.iter().fold(0, |m, c| m | c.mask())
    }

    pub fn stack_colors(&self) -> BTreeSet<Color> {
        self.stacks.iter().flatten().copied().collect()
    }

    /// `(stack index, height)` of a block standing in the scene.
    pub fn position(&self, c: Color) -> Option<(usize, usize)> {
        self.stacks.iter().enumerate().find_map(|(i, s)| s.iter().position(|&b| b == c).map(|h| (i, h)))
    }

    pub fn is_out(&self, c: Color) -> bool {
        self.out.contains(&c)
    }

    /// Relational equality of the standing blocks: same stacks in any order,
    /// out sets ignored.
    pub fn same_stacks(&self, other: &Configuration) -> bool {
        self.stacks_key() == other.stacks_key()
    }

    /// Relational key of the stacks alone.
    pub fn stacks_key(&self) -> CanonicalKey {
        canonical_key(&self.stacks, 0, CanonicalMode::Relational)
    }

    /// Same configuration with stacks sorted into relational canonical order.
    pub fn canonicalized(&self) -> Configuration {
        let mut stacks = self.stacks.clone();
        stacks.sort();
        Configuration { stacks, out: self.out.clone() }
    }

    /// Same stacks, nothing out.
    pub fn without_out(&self) -> Configuration {
        Configuration { stacks: self.stacks.clone(), out: BTreeSet::new() }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_config(self))
    }
}

impl FromStr for Configuration {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_config(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonicalMode {
    /// Stack order erased.
    Relational,
    /// Stack order kept (grid columns).
    Grid,
}

/// Compact key identifying a configuration under a [`CanonicalMode`].
///
/// Layout: stacks as 3-bit tokens (color ids, `7` between stacks) starting
/// at bit 0, the out mask at bits 40..46 and the mode flag at bit 63.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(pub u64);

fn canonical_key(stacks: &[Vec<Color>], out_mask: u8, mode: CanonicalMode) -> CanonicalKey {
    let mut order: Vec<&Vec<Color>> = stacks.iter().collect();
    if mode == CanonicalMode::Relational {
        order.sort();
    }
    let mut key = 0u64;
    let mut shift = 0;
    for (i, stack) in order.iter().enumerate() {
        if i > 0 {
            key |= 7 << shift;
            shift += 3;
        }
        for c in stack.iter() {
            key |= (c.id() as u64) << shift;
            shift += 3;
        }
    }
    key |= (out_mask as u64) << 40;
    if mode == CanonicalMode::Grid {
        key |= 1 << 63;
    }
    CanonicalKey(key)
}

pub fn canonical(cfg: &Configuration, mode: CanonicalMode) -> CanonicalKey {
    canonical_key(&cfg.stacks, cfg.out_mask(), mode)
}

/// Parses `R.G|B;out=Y`; the empty scene is `-`.
pub fn parse_config(text: &str) -> Result<Configuration, ParseError> {
    let (stack_part, out_part) = match text.find(';') {
        Some(i) => {
            let rest = &text[i + 1..];
            let list = rest.strip_prefix("out=").ok_or_else(|| ParseError::new(i + 1, "expected \"out=\""))?;
            (&text[..i], Some((i + 5, list)))
        }
        None => (text, None),
    };

    let mut stacks = Vec::new();
    if stack_part != "-" && !stack_part.is_empty() {
        let mut pos = 0;
        for stack_text in stack_part.split('|') {
            stacks.push(parse_color_list(stack_text, pos)?);
            pos += stack_text.len() + 1;
        }
    } else if stack_part.is_empty() && out_part.is_none() {
        return Err(ParseError::new(0, "empty input, use \"-\" for an empty scene"));
    }

    let mut out = BTreeSet::new();
    if let Some((offset, list)) = out_part {
        for c in parse_color_list(list, offset)? {
            if !out.insert(c) {
                return Err(ParseError::new(offset, format!("duplicate color {c}")));
            }
        }
    }

    Configuration::new(stacks, out).map_err(|e| ParseError::new(0, e.to_string()))
}

fn parse_color_list(text: &str, offset: usize) -> Result<Vec<Color>, ParseError> {
    if text.is_empty() {
        return Err(ParseError::new(offset, "empty color list"));
    }
    let mut colors = Vec::new();
    let mut pos = offset;
    for tok in text.split('.') {
        let mut chars = tok.chars();
        match (chars.next().and_then(Color::from_letter), chars.next()) {
            (Some(c), None) => colors.push(c),
            _ => return Err(ParseError::new(pos, format!("bad color {tok:?}"))),
        }
        pos += tok.len() + 1;
    }
    Ok(colors)
}

pub fn format_config(cfg: &Configuration) -> String {
    let join = |cs: &mut dyn Iterator<Item = &Color>| cs.map(|c| c.letter().to_string()).collect::<Vec<_>>().join(".");
    let mut s = if cfg.stacks.is_empty() {
        "-".to_string()
    } else {
        cfg.stacks.iter().map(|st| join(&mut st.iter())).collect::<Vec<_>>().join("|")
    };
    if !cfg.out.is_empty() {
        s.push_str(";out=");
        s.push_str(&join(&mut cfg.out.iter()));
    }
    s
}

/// A `(subject, destination)` pair without a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub subject: Color,
    pub dest: Destination,
}

impl Action {
    pub fn new(subject: Color, dest: Destination) -> Self {
        Action { subject, dest }
    }

    pub fn at(self, time: usize) -> Move {
        Move { subject: self.subject, dest: self.dest, time: time as u8 }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.subject, self.dest)
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s.split_once(',').ok_or_else(|| ParseError::new(0, format!("expected \"X,Y\", got {s:?}")))?;
        let subject = parse_color_list(x, 0)
            .ok()
            .filter(|v| v.len() == 1)
            .map(|v| v[0])
            .ok_or_else(|| ParseError::new(0, format!("bad subject {x:?}")))?;
        Ok(Action { subject, dest: y.parse()? })
    }
}

/// `move(X, Y, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub subject: Color,
    pub dest: Destination,
    pub time: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveError {
    #[error("block {0} cannot be moved onto itself")]
    SelfMove(Color),
    #[error("time step {0} outside 0..{MAX_MOVES}")]
    TimeOutOfRange(usize),
    #[error("move at index {index} has time {time}")]
    NonConsecutive { index: usize, time: u8 },
    #[error("{0} moves, at most {MAX_MOVES} allowed")]
    TooLong(usize),
}

impl Move {
    pub fn new(subject: Color, dest: Destination, time: usize) -> Result<Move, MoveError> {
        if dest == Destination::Block(subject) {
            return Err(MoveError::SelfMove(subject));
        }
        if time >= MAX_MOVES {
            return Err(MoveError::TimeOutOfRange(time));
        }
        Ok(Move { subject, dest, time: time as u8 })
    }

    pub fn action(&self) -> Action {
        Action { subject: self.subject, dest: self.dest }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "move({},{},{})", self.subject, self.dest, self.time)
    }
}

impl FromStr for Move {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix("move(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| ParseError::new(0, format!("expected move(X,Y,t), got {s:?}")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(ParseError::new(5, "move atom needs three arguments"));
        }
        let action: Action = format!("{},{}", parts[0], parts[1]).parse()?;
        let time: usize = parts[2].parse().map_err(|_| ParseError::new(5, format!("bad time step {:?}", parts[2])))?;
        Move::new(action.subject, action.dest, time).map_err(|e| ParseError::new(5, e.to_string()))
    }
}

/// Moves with consecutive time steps starting at 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MoveSequence {
    moves: Vec<Move>,
}

impl MoveSequence {
    pub fn new(moves: Vec<Move>) -> Result<Self, MoveError> {
        if moves.len() > MAX_MOVES {
            return Err(MoveError::TooLong(moves.len()));
        }
        for (i, m) in moves.iter().enumerate() {
            if m.time as usize != i {
                return Err(MoveError::NonConsecutive { index: i, time: m.time });
            }
            if m.dest == Destination::Block(m.subject) {
                return Err(MoveError::SelfMove(m.subject));
            }
        }
        Ok(MoveSequence { moves })
    }

    /// Builds a sequence from actions, numbering them from 0. Sequences
    /// produced this way may exceed [`MAX_MOVES`] (unbounded planning); they
    /// cannot be bit-encoded in that case.
    pub fn from_actions<I: IntoIterator<Item = Action>>(actions: I) -> Self {
        let moves = actions.into_iter().enumerate().map(|(t, a)| a.at(t)).collect();
        MoveSequence { moves }
    }

    pub fn empty() -> Self {
        MoveSequence::default()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.moves.iter().map(Move::action)
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

impl fmt::Display for MoveSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.moves.iter().map(Move::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MoveSequence {
    type Err = ParseError;

    /// Comma-separated `move(X,Y,t)` atoms; the empty string is the empty sequence.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut moves = Vec::new();
        let mut rest = s.trim();
        let mut pos = 0;
        while !rest.is_empty() {
            let end = rest.find(')').ok_or_else(|| ParseError::new(pos, "unterminated move atom"))?;
            let atom = &rest[..=end];
            moves.push(atom.parse::<Move>().map_err(|e| ParseError::new(pos + e.pos, e.msg))?);
            rest = &rest[end + 1..];
            pos += end + 1;
            if let Some(r) = rest.strip_prefix(',') {
                rest = r;
                pos += 1;
                if rest.is_empty() {
                    return Err(ParseError::new(pos, "trailing comma"));
                }
            } else if !rest.is_empty() {
                return Err(ParseError::new(pos, "expected ',' between moves"));
            }
        }
        MoveSequence::new(moves).map_err(|e| ParseError::new(0, e.to_string()))
    }
}

/// 5x5 occupancy grid; `grid[r][c]` is height `r` of column `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ArrangementVector {
    pub grid: [[bool; 5]; 5],
}

impl ArrangementVector {
    pub fn ones(&self) -> usize {
        self.grid.iter().flatten().filter(|&&b| b).count()
    }

    /// Row-major bits (`r * 5 + c`).
    pub fn bits(&self) -> [u8; 25] {
        let mut out = [0u8; 25];
        for r in 0..5 {
            for c in 0..5 {
                out[r * 5 + c] = self.grid[r][c] as u8;
            }
        }
        out
    }

    /// Checks gravity, left packing and the block cap.
    pub fn is_well_formed(&self) -> bool {
        if self.ones() > MAX_BLOCKS {
            return false;
        }
        let mut prev_occupied = true;
        for c in 0..5 {
            for r in 1..5 {
                if self.grid[r][c] && !self.grid[r - 1][c] {
                    return false;
                }
            }
            let occupied = self.grid[0][c];
            if occupied && !prev_occupied {
                return false;
            }
            prev_occupied = occupied;
        }
        true
    }
}

/// Five 3-bit color codes, bottom-to-top within a stack, stacks left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ColorVector {
    pub slots: [u8; 5],
}

impl ColorVector {
    /// Each slot as three bits, most significant first.
    pub fn bits(&self) -> [u8; 15] {
        let mut out = [0u8; 15];
        for (j, &code) in self.slots.iter().enumerate() {
            for k in 0..3 {
                out[j * 3 + k] = (code >> (2 - k)) & 1;
            }
        }
        out
    }
}

pub fn encode_arrangement(cfg: &Configuration) -> ArrangementVector {
    let mut arr = ArrangementVector::default();
    for (c, stack) in cfg.stacks.iter().enumerate() {
        for r in 0..stack.len() {
            arr.grid[r][c] = true;
        }
    }
    arr
}

pub fn encode_colors(cfg: &Configuration) -> ColorVector {
    let mut v = ColorVector::default();
    for (j, c) in cfg.stacks.iter().flatten().enumerate() {
        v.slots[j] = c.code();
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("arrangement has {ones} blocks but the color vector names {colors}")]
    CountMismatch { ones: usize, colors: usize },
    #[error("arrangement violates gravity or left packing")]
    MalformedGrid,
    #[error("color code {0:03b} is not a color")]
    BadCode(u8),
    #[error("color slots are not packed to the front")]
    Gap,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Inverse of ([`encode_arrangement`], [`encode_colors`]); the out set is
/// not representable and comes back empty.
pub fn decode_config(arr: &ArrangementVector, col: &ColorVector) -> Result<Configuration, DecodeError> {
    if !arr.is_well_formed() {
        return Err(DecodeError::MalformedGrid);
    }
    let colors = col.slots.iter().filter(|&&s| s != 0).count();
    let ones = arr.ones();
    if ones != colors {
        return Err(DecodeError::CountMismatch { ones, colors });
    }
    if col.slots[..colors].contains(&0) {
        return Err(DecodeError::Gap);
    }
    let mut codes = col.slots[..colors].iter();
    let mut stacks = Vec::new();
    for c in 0..5 {
        let height = (0..5).take_while(|&r| arr.grid[r][c]).count();
        if height == 0 {
            break;
        }
        let mut stack = Vec::with_capacity(height);
        for _ in 0..height {
            let code = *codes.next().expect("counts checked");
            stack.push(Color::from_id(code).ok_or(DecodeError::BadCode(code))?);
        }
        stacks.push(stack);
    }
    Ok(Configuration::from_stacks(stacks)?)
}

/// 40 binary features of one configuration: arrangement then colors.
pub fn config_features(cfg: &Configuration) -> [u8; CONFIG_FEATURES] {
    let mut out = [0u8; CONFIG_FEATURES];
    out[..25].copy_from_slice(&encode_arrangement(cfg).bits());
    out[25..].copy_from_slice(&encode_colors(cfg).bits());
    out
}

/// Source features followed by target features.
pub fn pair_features(src: &Configuration, tgt: &Configuration) -> [f64; PAIR_FEATURES] {
    let mut out = [0.0; PAIR_FEATURES];
    for (i, b) in config_features(src).iter().chain(config_features(tgt).iter()).enumerate() {
        out[i] = *b as f64;
    }
    out
}

/// 16 bits stored so that bit 0 is the most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MoveBits(pub u16);

impl MoveBits {
    pub fn bit(&self, i: usize) -> bool {
        (self.0 >> (15 - i)) & 1 == 1
    }

    pub fn to_hex(&self) -> String {
        format!("{:04x}", self.0)
    }
}

/// 128 bits stored so that bit 0 is the most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SequenceBits(pub u128);

impl SequenceBits {
    pub fn bit(&self, i: usize) -> bool {
        (self.0 >> (127 - i)) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn to_hex(&self) -> String {
        format!("{:032x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, ParseError> {
        if s.len() != 32 {
            return Err(ParseError::new(0, "expected 32 hex digits"));
        }
        u128::from_str_radix(s, 16).map(SequenceBits).map_err(|e| ParseError::new(0, e.to_string()))
    }

    pub fn to_reals(&self) -> [f64; SEQUENCE_BITS] {
        let mut out = [0.0; SEQUENCE_BITS];
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.bit(i) as u8 as f64;
        }
        out
    }
}

/// Subject one-hot in bits 0..8 (colors only), destination one-hot in 8..16.
pub fn encode_move(m: &Move) -> MoveBits {
    let x = m.subject.index();
    let y = 8 + m.dest.slot();
    MoveBits((1 << (15 - x)) | (1 << (15 - y)))
}

/// Slot `t` holds move `t`; unused slots are zero. Panics on sequences
/// longer than [`MAX_MOVES`].
pub fn encode_sequence(s: &MoveSequence) -> SequenceBits {
    assert!(s.len() <= MAX_MOVES, "sequence of {} moves cannot be encoded", s.len());
    let mut bits = 0u128;
    for (t, m) in s.moves.iter().enumerate() {
        bits |= (encode_move(m).0 as u128) << (16 * (MAX_MOVES - 1 - t));
    }
    SequenceBits(bits)
}

/// Activation below which a slot decodes to "no move".
pub const DECODE_THRESHOLD: f64 = 0.5;

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Total decoder for real-valued sequence activations. Each slot takes the
/// subject argmax over the six color positions and the destination argmax
/// over all eight; decoding stops at the first slot whose best activations
/// fall under [`DECODE_THRESHOLD`] or that names a self move.
pub fn decode_sequence(acts: &[f64]) -> MoveSequence {
    assert_eq!(acts.len(), SEQUENCE_BITS, "expected {SEQUENCE_BITS} activations");
    let mut moves = Vec::new();
    for t in 0..MAX_MOVES {
        let slot = &acts[t * MOVE_BITS..(t + 1) * MOVE_BITS];
        let (x, xv) = argmax(&slot[..6]);
        let (y, yv) = argmax(&slot[8..]);
        if xv < DECODE_THRESHOLD || yv < DECODE_THRESHOLD {
            break;
        }
        let subject = Color::ALL[x];
        let dest = Destination::ALL[y];
        if dest == Destination::Block(subject) {
            break;
        }
        moves.push(Move { subject, dest, time: t as u8 });
    }
    MoveSequence { moves }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Color::*;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn palette_is_a_bijection() {
        for (i, c) in Color::ALL.iter().enumerate() {
            assert_eq!(c.id() as usize, i + 1);
            assert_ne!(c.code(), 0);
            assert_eq!(Color::from_id(c.id()), Some(*c));
            assert_eq!(Color::from_letter(c.letter()), Some(*c));
        }
        assert_eq!(Color::from_id(0), None);
        assert_eq!(Color::from_id(7), None);
    }

    #[test]
    fn arrangement_examples() {
        let a = encode_arrangement(&cfg("R.G|B"));
        let ones: Vec<(usize, usize)> =
            (0..5).flat_map(|r| (0..5).map(move |c| (r, c))).filter(|&(r, c)| a.grid[r][c]).collect();
        assert_eq!(ones, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(encode_arrangement(&cfg("-;out=R")), ArrangementVector::default());
        let full = encode_arrangement(&cfg("R.G.B.Y.O"));
        for r in 0..5 {
            assert!(full.grid[r][0]);
        }
        assert_eq!(full.ones(), 5);
    }

    #[test]
    fn color_vector_examples() {
        assert_eq!(encode_colors(&cfg("R.G|B")).slots, [1, 2, 3, 0, 0]);
        assert_eq!(encode_colors(&Configuration::empty()).slots, [0; 5]);
        assert_eq!(encode_colors(&cfg("B|R")).slots, [3, 1, 0, 0, 0]);
    }

    #[test]
    fn decode_config_examples() {
        let c = cfg("R.G|B");
        assert_eq!(decode_config(&encode_arrangement(&c), &encode_colors(&c)).unwrap(), c);
        assert_eq!(
            decode_config(&ArrangementVector::default(), &ColorVector::default()).unwrap(),
            Configuration::empty()
        );
        let mut col = encode_colors(&c);
        col.slots[2] = 0;
        assert_eq!(
            decode_config(&encode_arrangement(&c), &col),
            Err(DecodeError::CountMismatch { ones: 3, colors: 2 })
        );
        let mut dup = encode_colors(&c);
        dup.slots[2] = 1;
        assert!(matches!(
            decode_config(&encode_arrangement(&c), &dup),
            Err(DecodeError::Config(ConfigError::DuplicateColor(R)))
        ));
    }

    #[test]
    fn move_encoding_examples() {
        let m = Move::new(R, Destination::Block(G), 2).unwrap();
        let bits = encode_move(&m);
        let set: Vec<usize> = (0..16).filter(|&i| bits.bit(i)).collect();
        assert_eq!(set, vec![0, 9]);
        let set: Vec<usize> =
            (0..16).filter(|&i| encode_move(&Move::new(B, Destination::Table, 0).unwrap()).bit(i)).collect();
        assert_eq!(set, vec![2, 14]);
        let set: Vec<usize> =
            (0..16).filter(|&i| encode_move(&Move::new(Y, Destination::Out, 5).unwrap()).bit(i)).collect();
        assert_eq!(set, vec![3, 15]);
        assert_eq!(Move::new(R, Destination::Block(R), 0), Err(MoveError::SelfMove(R)));
        assert_eq!(Move::new(R, Destination::Out, 8), Err(MoveError::TimeOutOfRange(8)));
    }

    #[test]
    fn sequence_encoding_examples() {
        assert_eq!(encode_sequence(&MoveSequence::empty()), SequenceBits(0));
        let one = MoveSequence::from_actions([Action::new(R, Destination::Block(G))]);
        let bits = encode_sequence(&one);
        assert!(bits.bit(0) && bits.bit(9));
        assert_eq!(bits.count_ones(), 2);
        assert_eq!(bits.to_hex(), "80400000000000000000000000000000");
        assert_eq!(SequenceBits::from_hex(&bits.to_hex()).unwrap(), bits);

        let eight = MoveSequence::from_actions((0..8).map(|i| Action::new(Color::ALL[i % 6], Destination::Out)));
        let bits = encode_sequence(&eight);
        for t in 0..8 {
            assert_eq!((0..16).filter(|&i| bits.bit(16 * t + i)).count(), 2);
        }
    }

    #[test]
    fn decode_sequence_rules() {
        assert!(decode_sequence(&[0.0; 128]).is_empty());
        let s = MoveSequence::from_actions([Action::new(G, Destination::Table), Action::new(R, Destination::Block(G))]);
        assert_eq!(decode_sequence(&encode_sequence(&s).to_reals()), s);

        // all subject and destination positions tied: lowest index wins,
        // which would be move(R,R), a self move, so shift the destination tie
        let mut acts = [0.0; 128];
        for v in &mut acts[0..6] {
            *v = 0.9;
        }
        for v in &mut acts[9..16] {
            *v = 0.9;
        }
        let d = decode_sequence(&acts);
        assert_eq!(d.moves(), &[Move::new(R, Destination::Block(G), 0).unwrap()]);

        // subject positions 6 and 7 are never read
        let mut acts = [0.0; 128];
        acts[6] = 1.0;
        acts[7] = 1.0;
        acts[0] = 0.6;
        acts[14] = 0.7;
        assert_eq!(decode_sequence(&acts).moves(), &[Move::new(R, Destination::Table, 0).unwrap()]);
    }

    #[test]
    fn canonical_keys() {
        let a = cfg("R|G");
        let b = cfg("G|R");
        assert_eq!(canonical(&a, CanonicalMode::Relational), canonical(&b, CanonicalMode::Relational));
        assert_ne!(canonical(&a, CanonicalMode::Grid), canonical(&b, CanonicalMode::Grid));
        for mode in [CanonicalMode::Relational, CanonicalMode::Grid] {
            assert_eq!(canonical(&a, mode), canonical(&a.clone(), mode));
            assert_ne!(canonical(&cfg("R"), mode), canonical(&cfg("R;out=G"), mode));
        }
    }

    #[test]
    fn parse_examples() {
        assert_eq!(cfg("R.G|B").stacks(), &[vec![R, G], vec![B]]);
        let c = cfg("B;out=Y");
        assert_eq!(c.stacks(), &[vec![B]]);
        assert_eq!(c.out().iter().copied().collect::<Vec<_>>(), vec![Y]);
        assert!(parse_config("R.R").unwrap_err().msg.contains("more than once"));
        assert_eq!(parse_config("-").unwrap(), Configuration::empty());
        assert_eq!(parse_config("-;out=R.G").unwrap().out().len(), 2);
        let err = parse_config("R.G|X").unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(parse_config("R||G").is_err());
        assert!(parse_config("R;in=G").is_err());
        assert!(parse_config("R.G.B|Y.O|P").is_err());
        assert!(parse_config("").is_err());
    }

    #[test]
    fn move_sequence_text() {
        let s: MoveSequence = "move(R,G,0),move(B,table,1),move(Y,out,2)".parse().unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_string(), "move(R,G,0),move(B,table,1),move(Y,out,2)");
        assert!("".parse::<MoveSequence>().unwrap().is_empty());
        assert!("move(R,G,1)".parse::<MoveSequence>().is_err());
        assert!("move(R,R,0)".parse::<MoveSequence>().is_err());
        assert!("move(R,G,0),".parse::<MoveSequence>().is_err());
    }

    #[test]
    fn config_validation() {
        assert_eq!(Configuration::from_stacks(vec![vec![]]), Err(ConfigError::EmptyStack(0)));
        let six = vec![Color::ALL.to_vec()];
        assert_eq!(Configuration::from_stacks(six), Err(ConfigError::TooManyBlocks(6)));
        let out: BTreeSet<Color> = [R].into();
        assert_eq!(Configuration::new(vec![vec![R]], out), Err(ConfigError::DuplicateColor(R)));
    }
}
