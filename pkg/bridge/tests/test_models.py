import pytest

from cragbridge.config import BridgeConfig
from cragbridge.models import (
    LexicalEvaluator,
    TemplateGenerator,
    _truncate_document,
    build_models,
)

FEILDEN_Q = "What is Henry Feilden's occupation?"
FEILDEN_DOC = (
    "Henry Wemyss Feilden was a British Army officer and naturalist. "
    "Feilden served in several campaigns and later devoted himself to "
    "polar exploration and ornithology."
)
MITOCHONDRIA_DOC = (
    "The mitochondrion is a membrane-bound organelle found in most cells. "
    "Mitochondria generate most of the cell's supply of adenosine triphosphate."
)

SMOKE_PAIRS = [
    (FEILDEN_Q, FEILDEN_DOC),
    (FEILDEN_Q, MITOCHONDRIA_DOC),
    ("Who directed Titanic?", "Titanic is a 1997 film directed by James Cameron."),
    ("Who directed Titanic?", "The Eiffel Tower is located in Paris."),
    ("What sport does Serena Williams play?", "Serena Williams is a tennis player."),
    ("what is the capital of france", "Paris is the capital of France."),
    ("what is the capital of france", "completely unrelated text about geology"),
    ("In what country is Mount Fuji located?", "Mount Fuji is in Japan."),
    ("Who wrote Dracula?", "Dracula is an 1897 novel by Bram Stoker."),
    ("What genre is Thriller?", "Thriller is a pop album."),
]


class TestLexicalEvaluator:
    evaluator = LexicalEvaluator()

    def test_smoke_set_stays_in_range(self):
        for question, document in SMOKE_PAIRS:
            score = self.evaluator.score(question, document)
            assert -1.0 <= score <= 1.0, (question, document)

    def test_entity_article_scores_in_correct_regime(self):
        assert self.evaluator.score(FEILDEN_Q, FEILDEN_DOC) > 0.59

    def test_unrelated_document_scores_in_incorrect_regime(self):
        assert self.evaluator.score(FEILDEN_Q, MITOCHONDRIA_DOC) < -0.99

    def test_no_entity_falls_back_to_overlap(self):
        # all-lowercase question: Jaccard fallback, identical text scores 1
        assert self.evaluator.score("apple banana", "apple banana") == pytest.approx(1.0)
        assert self.evaluator.score("apple banana", "cherry fig") == pytest.approx(-1.0)

    def test_deterministic(self):
        scores = {self.evaluator.score(FEILDEN_Q, FEILDEN_DOC) for _ in range(5)}
        assert len(scores) == 1

    def test_truncation_drops_document_side_only(self):
        question = "short question"
        document = " ".join(f"w{i}" for i in range(100))
        truncated = _truncate_document(question, document, max_tokens=10)
        assert len(truncated.split()) == 10 - len(question.split()) - 1
        assert truncated.split() == document.split()[: len(truncated.split())]

    def test_truncation_affects_score(self):
        cfg = BridgeConfig(max_input_tokens=8)
        small = LexicalEvaluator(cfg)
        # the entity mention sits past the cap, so the truncated evaluator
        # cannot see it
        doc = " ".join(["filler"] * 20) + " Henry Feilden"
        assert small.score(FEILDEN_Q, doc) < LexicalEvaluator().score(FEILDEN_Q, doc)


PROMPT = (
    "Answer the question in one or two concise sentences.\n"
    "Context:\n"
    "Henry Feilden was a naturalist. The sky is blue.\n"
    "Question: What is Henry Feilden's occupation?\n"
    "Answer:"
)


class TestTemplateGenerator:
    generator = TemplateGenerator()

    def test_echoes_overlapping_context_sentence(self):
        assert self.generator.generate(PROMPT, 128) == "Henry Feilden was a naturalist."

    def test_deterministic_across_calls(self):
        assert self.generator.generate(PROMPT, 128) == self.generator.generate(PROMPT, 128)

    def test_max_tokens_one_yields_single_token(self):
        assert len(self.generator.generate(PROMPT, 1).split()) == 1

    def test_no_context_falls_back(self):
        out = self.generator.generate("Question: who?\nAnswer:", 128)
        assert out == TemplateGenerator.FALLBACK

    def test_free_form_prompt_still_answers(self):
        assert self.generator.generate("just some words", 128)


class TestBuildModels:
    def test_stub_kind(self):
        evaluator, generator = build_models(BridgeConfig(), "stub")
        assert isinstance(evaluator, LexicalEvaluator)
        assert isinstance(generator, TemplateGenerator)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_models(BridgeConfig(), "quantum")
