#
# django-oppsched documentation build configuration file.
#
import datetime

extensions = ["sphinx.ext.autodoc"]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "django-oppsched"
copyright = f"{datetime.date.today().year}, django-oppsched contributors"

# The short X.Y version, kept in step by bumpversion.
version = "1.0.0"
release = version

exclude_patterns = ["_build"]
pygments_style = "sphinx"

# -- Options for HTML output -------------------------------------------------

try:
    import furo  # noqa: F401

    html_theme = "furo"
    html_theme_options = {
        "navigation_with_keys": True,
    }
except ImportError:
    html_theme = "default"

html_static_path = ["_static"]
htmlhelp_basename = "django-oppsched"

# -- Options for other builders ----------------------------------------------

latex_documents = [
    (
        "index",
        "django-oppsched.tex",
        "django-oppsched Documentation",
        "django-oppsched contributors",
        "manual",
    ),
]

man_pages = [
    (
        "index",
        "django-oppsched",
        "django-oppsched Documentation",
        ["django-oppsched contributors"],
        1,
    )
]

texinfo_documents = [
    (
        "index",
        "django-oppsched",
        "django-oppsched Documentation",
        "django-oppsched contributors",
        "django-oppsched",
        "Threshold-based opportunistic scheduling.",
        "Miscellaneous",
    ),
]
