mod common;

use common::*;
use veracity_core::executor::{
    ExecutorError, DUPLICATE_PREFIX, FORCED_DEFAULT_RATIONALE, TOOLS_UNAVAILABLE,
};
use veracity_core::gateway::MockToolServer;
use veracity_core::model::normalize_key;
use veracity_core::{
    Action, EvidenceRecord, Executor, ExecutorConfig, Gateway, MemoryPolicy, MemoryStore,
    ScriptedProvider, VeracityLabel,
};

fn config(policy: MemoryPolicy) -> ExecutorConfig {
    ExecutorConfig {
        policy,
        ..ExecutorConfig::default()
    }
}

#[test]
fn worked_example_trace() {
    let provider = ScriptedProvider::new(pirates_script());
    let gateway = Gateway::single(pirates_replay()).unwrap();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();

    assert_eq!(out.verdict.label, VeracityLabel::False);
    assert_eq!(out.trajectory.len(), 3);
    assert!(!out.trajectory.forced);
    assert_eq!(out.counter.total_issued(), 2);
    assert_eq!(out.counter.total_succeeded(), 2);
    let obs: Vec<_> = out
        .trajectory
        .steps()
        .iter()
        .map(|s| s.observation.as_deref())
        .collect();
    assert_eq!(obs, vec![Some(PIRATES_OBS1), Some(PIRATES_OBS2), None]);
    assert_eq!(out.delta.len(), 2);
    assert_eq!(out.delta[0].query, PIRATES_Q1);
    assert_eq!(out.delta[1].content, PIRATES_OBS2);
    assert_eq!(
        out.entity_keys,
        vec![
            "the cost of making pirates of the caribbean: on stranger tides (2011)",
            "$456m inflation-adjusted"
        ]
    );
    assert_eq!(provider.remaining(), 0);
}

#[test]
fn prompt_carries_claim_background_memory_and_history_in_order() {
    let provider = ScriptedProvider::new(pirates_script());
    let gateway = Gateway::single(pirates_replay()).unwrap();
    let clock = fixed_clock();
    let mut store = MemoryStore::default();
    store.update(
        &["$456m inflation-adjusted".to_string()],
        &[EvidenceRecord::new(
            "unrelated cached item",
            "search_google",
            "old",
            clock.0,
            "x",
        )],
    );
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    ex.verify(&pirates_claim(), &pirates_decomposition(), &store)
        .unwrap();

    let requests = provider.requests();
    let last = &requests[2][0].content;
    let claim = last.find(PIRATES_CLAIM).unwrap();
    let background = last.find("Knowledge triplets:").unwrap();
    let memory = last.find("unrelated cached item").unwrap();
    let history = last.find(PIRATES_OBS2).unwrap();
    assert!(claim < background && background < memory && memory < history);
    assert!(last.contains("Current step: 3 of 5"));
    assert!(requests[0][0].content.contains("Previous steps: (none)"));
}

#[test]
fn never_answering_agent_is_forced() {
    let script: Vec<String> = (0..5)
        .map(|i| tool_call("more", "search_google", &format!("q{i}")))
        .chain([answer("ok", "true")])
        .collect();
    let provider = ScriptedProvider::new(script);
    let gateway = Gateway::single(MockToolServer::reference("mock")).unwrap();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();
    assert!(out.trajectory.forced);
    assert_eq!(out.trajectory.len(), 6);
    assert_eq!(out.verdict.label, VeracityLabel::True);
    assert_eq!(out.provider_calls, 6);
    assert_eq!(out.counter.total_issued(), 5);
    let forced_prompt = &provider.requests()[5][0].content;
    assert!(forced_prompt.contains("step budget is exhausted"));
}

#[test]
fn forced_default_is_false_when_agent_keeps_acting() {
    let script: Vec<String> = (0..7)
        .map(|i| tool_call("more", "search_google", &format!("q{i}")))
        .collect();
    let provider = ScriptedProvider::new(script);
    let gateway = Gateway::single(MockToolServer::reference("mock")).unwrap();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();
    assert!(out.trajectory.forced);
    assert_eq!(out.verdict.label, VeracityLabel::False);
    assert_eq!(out.verdict.rationale, FORCED_DEFAULT_RATIONALE);
    assert_eq!(out.provider_calls, 7);
    let last = out.trajectory.steps().last().unwrap();
    assert_eq!(
        last.action,
        Action::Answer {
            label: VeracityLabel::False
        }
    );
}

#[test]
fn one_bad_output_is_repaired_two_are_fatal() {
    let provider = ScriptedProvider::new(vec!["let me think".to_string(), answer("fine", "TRUE")]);
    let gateway = Gateway::single(MockToolServer::reference("mock")).unwrap();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();
    assert_eq!(out.verdict.label, VeracityLabel::True);
    assert_eq!(out.provider_calls, 2);
    let retry = &provider.requests()[1];
    assert_eq!(retry.len(), 3);
    assert!(retry[2].content.contains("not valid JSON"));

    let provider = ScriptedProvider::new(vec!["nope", "still nope"]);
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let err = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap_err();
    assert!(matches!(err, ExecutorError::Parse { .. }));
}

#[test]
fn unknown_tool_and_duplicate_queries_are_observed_not_fatal() {
    let provider = ScriptedProvider::new(vec![
        tool_call("try", "search_bing", "x"),
        tool_call("search", "search_google", "Paris"),
        tool_call("again", "search_google", "Paris"),
        answer("done", "false"),
    ]);
    let gateway = Gateway::single(MockToolServer::reference("mock")).unwrap();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::On));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();
    let obs: Vec<&str> = out
        .trajectory
        .steps()
        .iter()
        .filter_map(|s| s.observation.as_deref())
        .collect();
    assert!(obs[0].starts_with("Error: unknown tool 'search_bing'. Available tools: get_article"));
    assert_eq!(obs[1], "MOCK:Paris");
    assert_eq!(obs[2], format!("{DUPLICATE_PREFIX} MOCK:Paris"));
    assert_eq!(out.counter.total_issued(), 3);
    assert_eq!(out.counter.total_succeeded(), 1);
    assert_eq!(out.gateway_calls, 1);
    assert_eq!(out.delta.len(), 1);
}

#[test]
fn memory_only_suppresses_tools() {
    let provider = ScriptedProvider::new(vec![
        tool_call("try", "search_google", "x"),
        answer("memory suffices", "true"),
    ]);
    let gateway = Gateway::disconnected();
    let clock = fixed_clock();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::Only));
    let out = ex
        .verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default(),
        )
        .unwrap();
    assert_eq!(
        out.trajectory.steps()[0].observation.as_deref(),
        Some(TOOLS_UNAVAILABLE)
    );
    assert_eq!(out.counter.total_issued(), 0);
    assert_eq!(out.gateway_calls, 0);
    assert!(provider.requests()[0][0]
        .content
        .contains("tools are unavailable"));
}

#[test]
fn memory_first_serves_matching_queries() {
    let clock = fixed_clock();
    let mut store = MemoryStore::default();
    let key = normalize_key("$456M inflation-adjusted");
    store.update(
        &[key],
        &[EvidenceRecord::new(
            PIRATES_OBS1,
            "search_google",
            PIRATES_Q1,
            clock.0,
            "old",
        )],
    );
    let provider = ScriptedProvider::new(pirates_script());
    let gateway = Gateway::single(pirates_replay()).unwrap();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::First));
    let out = ex
        .verify(&pirates_claim(), &pirates_decomposition(), &store)
        .unwrap();
    assert_eq!(out.memory_served, 1);
    assert_eq!(out.gateway_calls, 1);
    assert_eq!(out.counter.total_issued(), 1);
    assert!(out.trajectory.steps()[0]
        .observation
        .as_deref()
        .unwrap()
        .starts_with("From memory"));
    // Only the freshly searched record is new evidence.
    assert_eq!(out.delta.len(), 1);
    assert!(provider.requests()[0][0].content.contains("Memory first"));
}

#[test]
fn memory_off_ignores_store() {
    let clock = fixed_clock();
    let mut store = MemoryStore::default();
    store.update(
        &["$456m inflation-adjusted".to_string()],
        &[EvidenceRecord::new(
            "cached",
            "search_google",
            "q",
            clock.0,
            "old",
        )],
    );
    let provider = ScriptedProvider::new(vec![answer("x", "true")]);
    let gateway = Gateway::single(MockToolServer::reference("mock")).unwrap();
    let ex = Executor::new(&provider, &gateway, &clock, config(MemoryPolicy::Off));
    let out = ex
        .verify(&pirates_claim(), &pirates_decomposition(), &store)
        .unwrap();
    assert!(out.recalled.is_empty());
    assert!(!provider.requests()[0][0].content.contains("cached"));
}

#[test]
fn zero_step_budget_is_rejected() {
    let provider = ScriptedProvider::new(Vec::<String>::new());
    let gateway = Gateway::disconnected();
    let clock = fixed_clock();
    let cfg = ExecutorConfig {
        t_max: 0,
        ..ExecutorConfig::default()
    };
    let ex = Executor::new(&provider, &gateway, &clock, cfg);
    assert!(matches!(
        ex.verify(
            &pirates_claim(),
            &pirates_decomposition(),
            &MemoryStore::default()
        ),
        Err(ExecutorError::InvalidStepBudget)
    ));
}
