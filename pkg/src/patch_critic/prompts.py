"""Prompt catalog for every critic variant.

The templates are the exact texts the critics are prompted with; do not
reflow or "fix" their spacing, the bytes are contract. Placeholders use
``{{name}}`` and are substituted in a single pass, so placeholder-shaped
text inside substituted values is left alone.

The patch-equivalence template is our own: the catalog needed one for the
change-aware critics and none existed, so it follows the same tag
conventions as the rest.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PatchCriticError

ISOLATED_TEST_SOURCE = "isolated_test_source"
ISOLATED_TEST_PATCH = "isolated_test_patch"
HOLISTIC_TEST_SOURCE = "holistic_test_source"
HOLISTIC_TEST_PATCH = "holistic_test_patch"
CHANGE_AWARE_DEFAULT = "change_aware_default"
CHANGE_AWARE_FUNCTION = "change_aware_function"
REFERENCE_FREE = "reference_free"
REFERENCE_FREE_HINTS = "reference_free_hints"

ALL_VARIANTS = (
    ISOLATED_TEST_SOURCE,
    ISOLATED_TEST_PATCH,
    HOLISTIC_TEST_SOURCE,
    HOLISTIC_TEST_PATCH,
    CHANGE_AWARE_DEFAULT,
    CHANGE_AWARE_FUNCTION,
    REFERENCE_FREE,
    REFERENCE_FREE_HINTS,
)

# Variants whose critics judge one test at a time.
ISOLATED_VARIANTS = (ISOLATED_TEST_SOURCE, ISOLATED_TEST_PATCH)


class PromptError(PatchCriticError):
    """Unknown variant or placeholder mismatch while building a prompt."""


# Holistic critic over post-change source plus all tests.
HOLISTIC_TEST_SOURCE_TEMPLATE = """\
You are a code analysis assistant specializing in predicting test outcomes. 
You are provided with a set of functions/classes and associated tests and your task is to determine whether all of these tests will now pass or not.

<source>
{{source}}
</source>

Here is the test files containing the relevant test functions or classes.
<tests>
{{tests}}
</tests>

Please analyze the provided code and tests for your prediction. Follow these steps:

1. Carefully review the source code, focusing on the functional aspects.
2. Examine the provided tests and their assertions.
3. Reason whether each of the assertions in the provided tests, based on the provided source code, will apply or not.
4. Make reasonable assumptions about any missing context or dependencies. Note that such assumptions should result in a relatively lower confidence about your final predictions.
5. Ignore minor syntactic issues or missing API definitions, focusing on the logic and functionality.

Provide your analysis in the following format:

<analysis>
Explain your reasoning about how the patch affects the code's behavior and how it relates to the provided tests.
Discuss any potential issues or areas of concern.
</analysis>

After your analysis, provide your final prediction:

<prediction>yes</prediction>
If you believe all tests will pass after applying the patch.

<prediction>no</prediction>
If you believe one or more tests will fail after applying the patch.
Also provide your confidence level on a scale of 1-100 in the example format: <confidence>90</confidence>

Your prediction should be based solely on the functional aspects of the code changes and their potential impact on the provided test cases.
Ignore non-functional differences such as comments, coding style, or formatting.

Respond only with the analysis, confidence and prediction tags as described above.
Do not include any other text in your response."""

# Isolated critic over post-change source plus one test.
ISOLATED_TEST_SOURCE_TEMPLATE = """\
You are a code analysis assistant specializing in predicting test outcomes.
You are provided with a set of functions after applying a patch and a relevant unit test and your task is to determine whether this test will now pass or not.

<source>
{{source}}
</source>

Here is the test file containing the relevant test function or class.
<test>
{{test}}
</test>

To make your prediction, follow these steps:

1. Carefully review the given source code, focusing on the functional aspects.
2. Consider the provided test cases and how they relate to the source code.
3. Reason about whether the provided test case, based on the source code, will pass or fail.
4. Ignore syntactic errors or absence of any required APIs or source code, while making the best possible assumptions in this case. Note that such assumptions should result in a relatively lower confidence about your final predictions.

Provide your analysis and prediction in the following format:

<analysis>
Explain your analysis of the source code and how they relate to the provided test cases.
Discuss any potential issues or areas of concern.
</analysis>

After your analysis, provide your final determination on whether all test cases pass.
Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the example format: <confidence>90</confidence>

Remember, your prediction should be based solely on the functional aspects of the code changes and their potential impact on the provided test cases.
Ignore any non-functional differences, such as comments, coding style, or formatting.

Respond only with the analysis, confidence and prediction tags as described above.
Do not include any other text in your response."""

# Isolated critic over a candidate patch plus one test.
ISOLATED_TEST_PATCH_TEMPLATE = """\
You are a code analysis assistant specializing in predicting test outcomes. You are provided with a patch and a relevant unit test and your task is to determine whether this test will now pass or not.

<patch>
{{patch}}
</patch>

Here's the test file containing the relevant test function or class.
<test>
{{test}}
</test>

To make your prediction, follow these steps:

1. Carefully review the given patch, focusing on the functional changes (lines starting with '+' or '-').
2. Consider the provided test cases and how they relate to the changes in the patch.
3. Reason about whether the provided test case, based on the changes introduced by the patch, will pass or fail.
4. Ignore syntactic errors or absence of any required APIs or source code, while making the best possible assumptions in this case. Note that such assumptions should result in a relatively lower confidence about your final predictions.

Provide your analysis and prediction in the following format:

<analysis>
Explain your analysis of the patch and how the changes relate to the provided test cases. Discuss any potential issues or areas of concern.
</analysis>

After your analysis, provide your final determination on whether all test cases will pass after applying the patch. Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the example format: <confidence>90</confidence>

Remember, your prediction should be based solely on the functional aspects of the code changes in the patch and their potential impact on the provided test cases. Ignore any non-functional differences, such as comments, coding style, or formatting.

Respond only with the analysis, confidence and prediction tags as described above. Do not include any other text in your response."""

# Holistic critic over a candidate patch plus all tests.
HOLISTIC_TEST_PATCH_TEMPLATE = """\
You are a code analysis assistant specializing in predicting test outcomes.
You are provided with a patch and associated tests and your task is to determine whether all of these tests will now pass or not.

<patch>
{{patch}}
</patch>

Here is the test file containing the relevant test functions or classes.
<tests>
{{tests}}
</tests>

To make your prediction, follow these steps:

1. Carefully review the given patch, focusing on the functional changes (lines starting with '+' or '-').
2. Consider the provided test cases and how they relate to the changes in the patch.
3. Reason about whether the provided test case, based on the changes introduced by the patch, will pass or fail.
4. Ignore syntactic errors or absence of any required APIs or source code, while making the best possible assumptions in this case. Note that such assumptions should result in a relatively lower confidence about your final predictions.

Provide your analysis and prediction in the following format:

<analysis>
Explain your analysis of the patch and how the changes relate to the provided test cases. Discuss any potential issues or areas of concern.
</analysis>

After your analysis, provide your final determination on whether all test cases will pass after applying the patch.
Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the example format: <confidence>90</confidence>

Remember, your prediction should be based solely on the functional aspects of the code changes in the patch and their potential impact on the provided test cases.
Ignore any non-functional differences, such as comments, coding style, or formatting.

Respond only with the analysis, confidence and prediction tags as described above.
Do not include any other text in your response."""

# Reference-free critic over the issue description plus a patch.
REFERENCE_FREE_TEMPLATE = """\
You are tasked with analyzing an issue description and a corresponding patch to determine if the patch successfully resolves the described issue.
Your goal is to carefully examine the issue details and the changes proposed in the patch, then decide whether the patch adequately addresses the problem.

Here are the issue description and patch you need to analyze:
<issue_description>
{{issue_description}}
</issue_description>

<patch>
{{patch}}
</patch>

To analyze the issue and patch:

1. Carefully read the issue description to understand the problem that needs to be solved.
2. Examine the patch, focusing on the actual code changes (lines starting with '+' or '-').
3. Identify the main functional changes in the patch.
4. Compare the functional changes with the requirements outlined in the issue description.
5. Consider whether the patch fully addresses all aspects of the issue.

Provide your analysis and reasoning in the following structure:

<analysis>
1. Key points from the issue description:
[List the main problems or requirements described in the issue]

2. Functional changes in the patch:
[List the main functional changes introduced by the patch]

3. Comparison of issue requirements and patch changes:
[Explain how the changes in the patch relate to the requirements of the issue]

4. Reasoning:
[Provide your reasoning for why the patch does or does not fully resolve the issue]
</analysis>


After your analysis, provide your final determination on whether the patch resolves the described issue.
Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the following format: <confidence>90</confidence>

Remember to focus on whether the patch addresses all aspects of the issue described.
Consider not only if the patch fixes the immediate problem but also if it adheres to any additional requirements or constraints mentioned in the issue description.
Base your determination on whether applying the patch would fully resolve the described issue without introducing new problems or leaving any part of the issue unaddressed."""

# Reference-free critic that additionally sees the issue hints.
REFERENCE_FREE_HINTS_TEMPLATE = """\
You are tasked with analyzing an issue description, related hints, and corresponding patch to determine if the patch successfully resolves the described issue. 
Your goal is to carefully examine the issue details, the changes proposed in the patch, and the provided hints, then decide whether the patch adequately addresses the problem.

Here are the issue description, hints, and patch you need to analyze:

<issue_description>
{{issue_description}}
</issue_description>

<hints>
{{hints}}
</hints>

<patch>
{{patch}}
</patch>

To analyze the issue, patch, and hints:

1. Carefully read the issue description to understand the problem that needs to be solved.
2. Review the hints to gain additional context and suggested solutions.
3. Examine the patch, focusing on the actual code changes (lines starting with '+' or '-').
4. Identify the main functional changes in the patch.
5. Compare the functional changes with the requirements outlined in the issue description and any relevant suggestions from the hints.
6. Consider whether the patch fully addresses all aspects of the issue and incorporates appropriate suggestions from the hints.

Provide your analysis and reasoning in the following structure:

<analysis>
1. Key points from the issue description:
[List the main problems or requirements described in the issue]

2. Relevant suggestions from hints:
[Summarize any important suggestions or context provided in the hints]

3. Functional changes in the patch:
[List the main functional changes introduced by the patch]

4. Comparison of issue requirements, hints, and patch changes:
[Explain how the changes in the patch relate to the requirements of the issue and suggestions from the hints]

5. Reasoning:
[Provide your reasoning for why the patch does or does not fully resolve the issue, considering both the issue description and hints]
</analysis>

After your analysis, provide your final determination on whether the patch resolves the described issue.
Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the following format: <confidence>90</confidence>

Remember to focus on whether the patch addresses all aspects of the issue described and incorporates relevant suggestions from the hints. 
Consider not only if the patch fixes the immediate problem but also if it adheres to any additional requirements or constraints mentioned in the issue description or suggested in the hints. 
Base your determination on whether applying the patch would fully resolve the described issue without introducing new problems or leaving any part of the issue unaddressed, while also taking into account the context and suggestions provided in the hints."""

# Patch-equivalence probing for the change-aware critics (no published
# template exists for this; authored here with the same tag conventions).
CHANGE_AWARE_TEMPLATE = """\
You are a code analysis assistant specializing in comparing code patches.
You are provided with a candidate patch and a reference patch for the same task and your task is to determine whether the two patches would result in the same functional outcome.

<patch>
{{patch}}
</patch>

Here is the reference patch that is known to resolve the task.
<reference_patch>
{{reference_patch}}
</reference_patch>

To make your prediction, follow these steps:

1. Carefully review both patches, focusing on the functional changes (lines starting with '+' or '-').
2. Identify the behavior each patch introduces, removes, or modifies.
3. Reason about whether the candidate patch would result in the same functional outcome as the reference patch, even if the edits differ in location or style.
4. Ignore syntactic errors or absence of any required APIs or source code, while making the best possible assumptions in this case. Note that such assumptions should result in a relatively lower confidence about your final predictions.

Provide your analysis and prediction in the following format:

<analysis>
Explain your analysis of both patches and how their changes relate to each other. Discuss any potential issues or areas of concern.
</analysis>

After your analysis, provide your final determination on whether the two patches result in the same functional outcome.
Your determination should either be <prediction>yes</prediction> or <prediction>no</prediction>.

Also provide your confidence level on a scale of 1-100 in the example format: <confidence>90</confidence>

Remember, your prediction should be based solely on the functional aspects of the code changes and their potential impact. Ignore any non-functional differences, such as comments, coding style, or formatting.

Respond only with the analysis, confidence and prediction tags as described above.
Do not include any other text in your response."""


_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    """One critic variant's template with its declared placeholders."""

    variant: str
    template_text: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.template_text))

    def render(self, inputs: dict[str, str]) -> str:
        given = set(inputs)
        declared = self.placeholders
        missing = declared - given
        if missing:
            raise PromptError(
                f"{self.variant}: missing placeholder {sorted(missing)[0]!r}"
            )
        extra = given - declared
        if extra:
            raise PromptError(
                f"{self.variant}: unexpected placeholder {sorted(extra)[0]!r}"
            )
        # One pass: values containing placeholder-shaped text are not re-expanded.
        return _PLACEHOLDER_RE.sub(lambda m: inputs[m.group(1)], self.template_text)


TEMPLATES: dict[str, PromptTemplate] = {
    ISOLATED_TEST_SOURCE: PromptTemplate(
        ISOLATED_TEST_SOURCE, ISOLATED_TEST_SOURCE_TEMPLATE
    ),
    ISOLATED_TEST_PATCH: PromptTemplate(
        ISOLATED_TEST_PATCH, ISOLATED_TEST_PATCH_TEMPLATE
    ),
    HOLISTIC_TEST_SOURCE: PromptTemplate(
        HOLISTIC_TEST_SOURCE, HOLISTIC_TEST_SOURCE_TEMPLATE
    ),
    HOLISTIC_TEST_PATCH: PromptTemplate(
        HOLISTIC_TEST_PATCH, HOLISTIC_TEST_PATCH_TEMPLATE
    ),
    CHANGE_AWARE_DEFAULT: PromptTemplate(CHANGE_AWARE_DEFAULT, CHANGE_AWARE_TEMPLATE),
    CHANGE_AWARE_FUNCTION: PromptTemplate(
        CHANGE_AWARE_FUNCTION, CHANGE_AWARE_TEMPLATE
    ),
    REFERENCE_FREE: PromptTemplate(REFERENCE_FREE, REFERENCE_FREE_TEMPLATE),
    REFERENCE_FREE_HINTS: PromptTemplate(
        REFERENCE_FREE_HINTS, REFERENCE_FREE_HINTS_TEMPLATE
    ),
}


def build_prompt(variant: str, inputs: dict[str, str]) -> str:
    """Render the template for ``variant``; inputs must match exactly."""
    if variant not in TEMPLATES:
        raise PromptError(f"unknown critic variant {variant!r}")
    return TEMPLATES[variant].render(inputs)
