"""Coverage-guided testing toolkit for LSTM classifiers.

The library loads an LSTM classifier from a weight file, runs traced forward
passes, measures structural coverage of the recurrent layer (stepwise hidden
state change, forget-gate activity, and temporal activation patterns), mutates
seed inputs with gradient ascent or discrete token edits, judges mutants
against a norm-ball oracle, and drives full test campaigns that report
coverage and adversarial statistics.
"""

from .model import (
    DenseLayerWeights,
    LstmLayerWeights,
    ModelError,
    ModelParseError,
    ModelShapeError,
    ModelSpec,
    StepTrace,
    Trace,
    class_probabilities,
    input_gradient,
    load_model,
    lstm_step,
    prediction_loss,
    run_forward,
    save_model,
)
from .coverage import (
    AggregateInfo,
    CoverageConfig,
    CoverageState,
    Symbolizer,
    aggregate_info,
    coverage_rates,
    coverage_times,
    delta_aggregate,
    fit_symbolizer,
    forget_rate,
    symbolize_trace,
    trace_conditions,
    update_onestep_coverage,
    update_sequence_coverage,
)
from .mutation import (
    DISCRETE_OPS,
    DiscreteInput,
    MutationConfig,
    mutate_discrete,
    sample_params,
    sga_mutate,
)
from .oracle import OracleConfig, Verdict, adversarial_curve, judge
from .datasets import (
    DatasetError,
    load_idx_images,
    load_idx_labels,
    load_json_dataset,
    load_synonyms,
    load_token_dataset,
    load_vocabulary,
)
from .harness import (
    CampaignConfig,
    CampaignResult,
    CountStop,
    CoverageStop,
    TestCase,
    TestSuite,
    load_suite,
    minimal_test_suite,
    run_campaign,
    save_suite,
    select_seeds,
)
from .reporting import CampaignReport, Snapshot, append_record, export, parse_log

__version__ = "0.1.0"

__all__ = [
    "AggregateInfo",
    "CampaignConfig",
    "CampaignReport",
    "CampaignResult",
    "CountStop",
    "CoverageConfig",
    "CoverageState",
    "CoverageStop",
    "DISCRETE_OPS",
    "DatasetError",
    "DenseLayerWeights",
    "DiscreteInput",
    "LstmLayerWeights",
    "ModelError",
    "ModelParseError",
    "ModelShapeError",
    "ModelSpec",
    "MutationConfig",
    "OracleConfig",
    "Snapshot",
    "StepTrace",
    "Symbolizer",
    "TestCase",
    "TestSuite",
    "Trace",
    "Verdict",
    "adversarial_curve",
    "aggregate_info",
    "append_record",
    "class_probabilities",
    "coverage_rates",
    "coverage_times",
    "delta_aggregate",
    "export",
    "fit_symbolizer",
    "forget_rate",
    "input_gradient",
    "judge",
    "load_idx_images",
    "load_idx_labels",
    "load_json_dataset",
    "load_model",
    "load_suite",
    "load_synonyms",
    "load_token_dataset",
    "load_vocabulary",
    "lstm_step",
    "minimal_test_suite",
    "mutate_discrete",
    "parse_log",
    "prediction_loss",
    "run_campaign",
    "run_forward",
    "sample_params",
    "save_model",
    "save_suite",
    "select_seeds",
    "sga_mutate",
    "symbolize_trace",
    "trace_conditions",
    "update_onestep_coverage",
    "update_sequence_coverage",
]
