//! Sentence simplification through a chat-completion model, and splicing of
//! simplified text back into the document.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linguistics::Lexicon;

/// System instruction sent with every request.
pub const SYSTEM_PROMPT: &str = "I want you to replace the user's complex sentence with simple sentence(s). Keep the meaning the same, but make them simpler. Output only the simplified sentence(s).";

pub const DEFAULT_RETRIES: usize = 3;

static EXAMPLE_PAIRS: &str = include_str!("../data/example_pairs.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplificationRequest {
    pub sentence_index: usize,
    pub original: String,
    pub system_instruction: String,
    /// The original sentence, verbatim.
    pub user_content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplificationResult {
    pub sentence_index: usize,
    pub original: String,
    pub simplified: String,
    pub client_id: String,
    pub latency_ms: f64,
}

pub fn build_prompt(original: &str) -> Result<SimplificationRequest> {
    build_prompt_for(0, original)
}

pub fn build_prompt_for(sentence_index: usize, original: &str) -> Result<SimplificationRequest> {
    if original.trim().is_empty() {
        return Err(Error::Empty("sentence to simplify"));
    }
    Ok(SimplificationRequest {
        sentence_index,
        original: original.to_string(),
        system_instruction: SYSTEM_PROMPT.to_string(),
        user_content: original.to_string(),
    })
}

/// A chat-completion backend: one request in, completion text out.
pub trait CompletionClient: Send + Sync {
    fn id(&self) -> String;

    fn complete(&self, request: &SimplificationRequest) -> Result<String>;
}

/// Sends the request, retrying retriable failures up to `retries` extra
/// times, and validates the completion.
pub fn simplify_with_retries(
    request: &SimplificationRequest,
    client: &dyn CompletionClient,
    retries: usize,
) -> Result<SimplificationResult> {
    let started = Instant::now();
    let mut attempt = 0;
    let completion = loop {
        match client.complete(request) {
            Ok(text) => break text,
            Err(e) if e.is_retriable() && attempt < retries => attempt += 1,
            Err(e) => return Err(e),
        }
    };
    let simplified = completion.trim();
    if simplified.is_empty() {
        return Err(Error::EmptySimplification(request.sentence_index));
    }
    Ok(SimplificationResult {
        sentence_index: request.sentence_index,
        original: request.original.clone(),
        simplified: simplified.to_string(),
        client_id: client.id(),
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

pub fn simplify(request: &SimplificationRequest, client: &dyn CompletionClient) -> Result<SimplificationResult> {
    simplify_with_retries(request, client, DEFAULT_RETRIES)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplificationPair {
    pub original: String,
    pub simplified: String,
}

pub fn example_pairs() -> Vec<SimplificationPair> {
    serde_json::from_str(EXAMPLE_PAIRS).expect("bundled pairs parse")
}

pub fn load_pairs(path: &Path) -> Result<Vec<SimplificationPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// What the mock does for sentences missing from its fixture table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MockFallback {
    /// Rewrite with the built-in rules.
    #[default]
    Rules,
    Echo,
    /// Return an empty completion.
    Empty,
    /// Fail with a non-retriable error.
    Fail,
}

/// Word swaps tried by the rule-based fallback: (harder, plainer).
const SWAPS: &[(&str, &str)] = &[
    ("approximately", "about"),
    ("authorities", "officials"),
    ("commence", "start"),
    ("consequently", "so"),
    ("deliberate", "planned"),
    ("demonstrated", "showed"),
    ("furthermore", "also"),
    ("however", "but"),
    ("moreover", "also"),
    ("nevertheless", "still"),
    ("numerous", "many"),
    ("purchase", "buy"),
    ("significant", "big"),
    ("subsequently", "later"),
    ("substantial", "large"),
    ("suspect", "think"),
    ("unknown", "not known"),
    ("utilize", "use"),
];

/// Offline deterministic completion client driven by a fixture table.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    table: HashMap<String, String>,
    fallback: MockFallback,
    aoa: Option<Lexicon>,
    failing: HashMap<String, bool>,
}

impl MockClient {
    pub fn new(fallback: MockFallback) -> Self {
        MockClient {
            fallback,
            ..Default::default()
        }
    }

    pub fn echo() -> Self {
        Self::new(MockFallback::Echo)
    }

    /// Loaded with the bundled example pairs, rule-based fallback.
    pub fn with_examples() -> Self {
        Self::new(MockFallback::Rules).with_pairs(example_pairs())
    }

    pub fn with_pairs(mut self, pairs: impl IntoIterator<Item = SimplificationPair>) -> Self {
        for p in pairs {
            self.table.insert(p.original.trim().to_string(), p.simplified);
        }
        self
    }

    /// Word swaps are applied only when the plainer word has a lower AoA
    /// rating than the word it replaces (or the replaced word is unrated).
    pub fn with_aoa_lexicon(mut self, aoa: Lexicon) -> Self {
        self.aoa = Some(aoa);
        self
    }

    /// Makes requests for `original` fail; `retriable` controls whether
    /// the failure invites a retry.
    pub fn failing_on(mut self, original: &str, retriable: bool) -> Self {
        self.failing.insert(original.trim().to_string(), retriable);
        self
    }

    fn swap_allowed(&self, hard: &str, plain: &str) -> bool {
        let Some(aoa) = &self.aoa else { return true };
        match (aoa.get(hard), plain.split_whitespace().map(|w| aoa.get(w)).collect::<Option<Vec<_>>>()) {
            (Some(h), Some(p)) => p.iter().all(|&v| v < h),
            (None, _) => true,
            (Some(_), None) => false,
        }
    }

    /// Rule-based rewrite: "; however," becomes ", but" and listed words are
    /// swapped for plainer ones, preserving capitalization and punctuation.
    pub fn rewrite(&self, sentence: &str) -> String {
        let joined = sentence.replace("; however,", ", but");
        joined
            .split(' ')
            .map(|chunk| {
                let start = chunk.find(char::is_alphanumeric).unwrap_or(chunk.len());
                let end = chunk
                    .char_indices()
                    .filter(|(_, c)| c.is_alphanumeric())
                    .map(|(i, c)| i + c.len_utf8())
                    .last()
                    .unwrap_or(start);
                let core = &chunk[start..end];
                let lower = core.to_lowercase();
                let Some(&(_, plain)) = SWAPS.iter().find(|(hard, _)| *hard == lower) else {
                    return chunk.to_string();
                };
                if !self.swap_allowed(&lower, plain) {
                    return chunk.to_string();
                }
                let replacement = if core.chars().next().is_some_and(char::is_uppercase) {
                    let mut c = plain.chars();
                    c.next().map_or(String::new(), |f| f.to_uppercase().chain(c).collect())
                } else {
                    plain.to_string()
                };
                format!("{}{}{}", &chunk[..start], replacement, &chunk[end..])
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl CompletionClient for MockClient {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &SimplificationRequest) -> Result<String> {
        let key = request.user_content.trim();
        if let Some(&retriable) = self.failing.get(key) {
            return Err(Error::Client {
                message: format!("mock failure for sentence {}", request.sentence_index),
                retriable,
            });
        }
        if let Some(hit) = self.table.get(key) {
            return Ok(hit.clone());
        }
        match self.fallback {
            MockFallback::Rules => Ok(self.rewrite(&request.user_content)),
            MockFallback::Echo => Ok(request.user_content.clone()),
            MockFallback::Empty => Ok(String::new()),
            MockFallback::Fail => Err(Error::Client {
                message: "sentence not in mock fixture table".into(),
                retriable: false,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Used instead of the environment variable when set.
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    pub retries: usize,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        HttpClientConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            api_key: None,
            timeout_ms: 30_000,
            retries: DEFAULT_RETRIES,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body of the chat-completion endpoint. Decoding parameters are
/// left to the provider's defaults.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(model: &str, request: &SimplificationRequest) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: request.system_instruction.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: request.user_content.clone(),
                },
            ],
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

/// Live chat-completion client over HTTP.
pub struct HttpClient {
    config: HttpClientConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let api_key = config
            .api_key
            .clone()
            .or_else(|| std::env::var(&config.api_key_env).ok());
        HttpClient {
            config,
            agent,
            api_key,
        }
    }

    pub fn retries(&self) -> usize {
        self.config.retries
    }
}

impl CompletionClient for HttpClient {
    fn id(&self) -> String {
        format!("http:{} (provider-default decoding)", self.config.model)
    }

    fn complete(&self, request: &SimplificationRequest) -> Result<String> {
        let mut call = self
            .agent
            .post(&self.config.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let body = ChatRequest::new(&self.config.model, request);
        let response = call.send_json(serde_json::to_value(&body)?).map_err(|e| match e {
            ureq::Error::Status(code, _) => Error::Client {
                message: format!("HTTP status {code}"),
                retriable: code == 429 || code >= 500,
            },
            ureq::Error::Transport(t) => Error::Client {
                message: t.to_string(),
                retriable: true,
            },
        })?;
        let parsed: ChatResponse = response.into_json().map_err(|e| Error::Client {
            message: format!("malformed response: {e}"),
            retriable: false,
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Client {
                message: "response has no choices".into(),
                retriable: false,
            })
    }
}

/// Sentence slots of a document being simplified. A slot may come to hold
/// several sentences; slot count never changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDocument {
    pub slots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub index: usize,
    pub before: String,
    pub after: String,
}

impl SlotDocument {
    pub fn new(slots: Vec<String>) -> Self {
        SlotDocument { slots }
    }

    pub fn text(&self) -> String {
        self.slots.join(" ")
    }

    pub fn replace_sentence(&mut self, index: usize, simplified: &str) -> Result<ChangeRecord> {
        let len = self.slots.len();
        let slot = self.slots.get_mut(index).ok_or(Error::OutOfRange { index, len })?;
        let before = std::mem::replace(slot, simplified.to_string());
        Ok(ChangeRecord {
            index,
            before,
            after: simplified.to_string(),
        })
    }

    pub fn undo(&mut self, change: &ChangeRecord) -> Result<()> {
        let len = self.slots.len();
        let slot = self
            .slots
            .get_mut(change.index)
            .ok_or(Error::OutOfRange { index: change.index, len })?;
        *slot = change.before.clone();
        Ok(())
    }
}

/// Functional form of [`SlotDocument::replace_sentence`].
pub fn replace_sentence(doc: &[String], index: usize, simplified: &str) -> Result<(Vec<String>, ChangeRecord)> {
    let mut d = SlotDocument::new(doc.to_vec());
    let change = d.replace_sentence(index, simplified)?;
    Ok((d.slots, change))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn prompt_is_verbatim() {
        let r = build_prompt("X.").unwrap();
        assert_eq!(r.system_instruction, SYSTEM_PROMPT);
        assert_eq!(r.user_content, "X.");
        let r = build_prompt("  He said \"no\".  ").unwrap();
        assert_eq!(r.user_content, "  He said \"no\".  ");
        assert!(build_prompt("").is_err());
        assert_eq!(build_prompt("a b").unwrap(), build_prompt("a b").unwrap());
    }

    #[test]
    fn mock_fixture_and_fallbacks() {
        let pairs = example_pairs();
        let mock = MockClient::with_examples();
        let r = simplify(&build_prompt(&pairs[0].original).unwrap(), &mock).unwrap();
        assert_eq!(r.simplified, pairs[0].simplified);
        assert_eq!(r.client_id, "mock");

        let echo = MockClient::echo();
        let r = simplify(&build_prompt(" Stay here. ").unwrap(), &echo).unwrap();
        assert_eq!(r.simplified, "Stay here.");

        let empty = MockClient::new(MockFallback::Empty);
        assert!(matches!(simplify(&build_prompt("X.").unwrap(), &empty), Err(Error::EmptySimplification(0))));
    }

    #[test]
    fn rule_rewrite() {
        let mock = MockClient::new(MockFallback::Rules);
        assert_eq!(
            mock.rewrite("The cause is unknown; however, Authorities suspect arson."),
            "The cause is not known, but Officials think arson."
        );
        let guided = MockClient::new(MockFallback::Rules)
            .with_aoa_lexicon(crate::linguistics::Lexicons::bundled().aoa);
        assert_eq!(guided.rewrite("They suspect a deliberate act."), "They think a deliberate act.");
    }

    struct Flaky {
        calls: AtomicUsize,
        failures: usize,
        retriable: bool,
    }

    impl CompletionClient for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }

        fn complete(&self, request: &SimplificationRequest) -> Result<String> {
            if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
                Err(Error::Client {
                    message: "down".into(),
                    retriable: self.retriable,
                })
            } else {
                Ok(request.user_content.to_uppercase())
            }
        }
    }

    #[test]
    fn bounded_retries() {
        let req = build_prompt("ok").unwrap();
        let flaky = Flaky { calls: AtomicUsize::new(0), failures: 2, retriable: true };
        assert_eq!(simplify_with_retries(&req, &flaky, 2).unwrap().simplified, "OK");
        let flaky = Flaky { calls: AtomicUsize::new(0), failures: 3, retriable: true };
        assert!(simplify_with_retries(&req, &flaky, 2).is_err());
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
        let fatal = Flaky { calls: AtomicUsize::new(0), failures: 1, retriable: false };
        assert!(simplify_with_retries(&req, &fatal, 5).is_err());
        assert_eq!(fatal.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn replacement_is_local_and_undoable() {
        let doc: Vec<String> = ["A.", "B.", "C."].map(String::from).to_vec();
        let (after, change) = replace_sentence(&doc, 1, "Bee. Bee two.").unwrap();
        assert_eq!(after.len(), 3);
        assert_eq!((&after[0], &after[2]), (&doc[0], &doc[2]));
        assert_eq!(after[1], "Bee. Bee two.");
        let mut d = SlotDocument::new(after);
        d.undo(&change).unwrap();
        assert_eq!(d.slots, doc);
        assert!(replace_sentence(&doc, 3, "x").is_err());
    }

    #[test]
    fn chat_request_wire_format() {
        let req = build_prompt_for(4, "Hard sentence.").unwrap();
        let body = serde_json::to_value(ChatRequest::new("gpt-3.5-turbo", &req)).unwrap();
        assert_eq!(
            body,
            serde_json::json!({
                "model": "gpt-3.5-turbo",
                "messages": [
                    {"role": "system", "content": SYSTEM_PROMPT},
                    {"role": "user", "content": "Hard sentence."}
                ]
            })
        );
    }

    #[test]
    fn http_client_against_local_endpoint() {
        let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
        let addr = server.server_addr().to_ip().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (i, mut req) in server.incoming_requests().take(3).enumerate() {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let auth = req
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.to_string());
                seen.push((body, auth));
                let reply = match i {
                    0 => tiny_http::Response::from_string("busy").with_status_code(503),
                    1 => tiny_http::Response::from_string(
                        r#"{"choices":[{"message":{"role":"assistant","content":"  Easy one.  "}}]}"#,
                    ),
                    _ => tiny_http::Response::from_string("nope").with_status_code(400),
                };
                req.respond(reply).unwrap();
            }
            seen
        });
        let client = HttpClient::new(HttpClientConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            model: "m".into(),
            api_key: Some("k".into()),
            timeout_ms: 5_000,
            ..Default::default()
        });
        let req = build_prompt_for(2, "Hard one.").unwrap();
        let out = simplify(&req, &client).unwrap();
        assert_eq!((out.sentence_index, out.simplified.as_str()), (2, "Easy one."));
        let err = client.complete(&req).unwrap_err();
        assert!(!err.is_retriable());
        let seen = handle.join().unwrap();
        assert_eq!(seen.len(), 3);
        let sent: ChatRequest = serde_json::from_str(&seen[1].0).unwrap();
        assert_eq!(sent, ChatRequest::new("m", &req));
        assert_eq!(seen[1].1.as_deref(), Some("Bearer k"));
    }
}
