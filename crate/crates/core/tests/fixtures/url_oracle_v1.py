# SUPPORTED URLS: "http", "file"
# - call_impl: invokes pre- and post-patch versions and captures returned values and raised exceptions
# - pre_exc and post_exc: exceptions raised (if any) or None if no exception
# - pre_res and post_res: results returned by the functions (if no exceptions raised)

# <<PRE_IMPL>>

# <<POST_IMPL>>

## PRESERVED BEHAVIORS: VALID URLS
valid_url = "http://example.com/path"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_validation, post_validation, valid_url)
assert pre_exc is None and post_exc is None and pre_res == valid_url and post_res == valid_url, (
    "[PRESERVED BEHAVIORS] Both pre_validation and post_validation should accept valid URLs.")

## PRESERVED BEHAVIORS: INVALID URLS
invalid_url = "ftp://example.com/path"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_validation, post_validation, invalid_url)
assert isinstance(pre_exc, ValidationError) and isinstance(post_exc, ValidationError), (
    "[PRESERVED BEHAVIORS] Both pre_validation and post_validation should reject invalid URLs.")

## CHANGED BEHAVIORS: FILE URLS
lower_file = "file:///etc/passwd"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_validation, post_validation, lower_file)
assert isinstance(pre_exc, ValidationError) and post_exc is None and post_res == lower_file, (
    "[CHANGED BEHAVIORS] post_validation should accept file URLs while pre_validation rejects them.")

## CHANGED BEHAVIORS: FILE URLS (UPPERCASE SCHEME)
upper_file = "FILE:///etc/passwd"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_validation, post_validation, upper_file)
assert isinstance(pre_exc, ValidationError) and post_exc is None and post_res == upper_file, (
    "[CHANGED BEHAVIORS] post_validation should accept file URLs while pre_validation rejects them.")
